import itertools

import numpy as np
import pytest

from lassoridge.core import DesignMatrix, normalize_columns
from lassoridge.lasso import (
    LassoSettings,
    equicorrelation,
    fit_lasso,
    kkt_slack,
    lambda_max,
    lasso_objective,
    lasso_path,
    soft_threshold,
)


def orthogonal_design(rng, n, p):
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return DesignMatrix(np.sqrt(n) * Q, normalized=True)


def enumerate_lasso(X, y, lam):
    """Exact minimizer by trying every support and sign pattern."""
    n, p = X.shape
    best, best_obj = np.zeros(p), None
    for signs in itertools.product((-1, 0, 1), repeat=p):
        s = np.array(signs, dtype=float)
        S = np.flatnonzero(s)
        b = np.zeros(p)
        if S.size:
            XS = X[:, S]
            try:
                b[S] = np.linalg.solve(XS.T @ XS / n, XS.T @ y / n - lam * s[S])
            except np.linalg.LinAlgError:
                continue
            if np.any(np.sign(b[S]) != s[S]):
                continue
        r = y - X @ b
        obj = r @ r / (2 * n) + lam * np.abs(b).sum()
        if best_obj is None or obj < best_obj:
            best, best_obj = b, obj
    return best, best_obj


def subgradient_reference(X, y, lam, iters=1_000_000):
    n, p = X.shape
    b = np.zeros(p)
    best = None
    G, c = X.T @ X / n, X.T @ y / n
    for k in range(1, iters + 1):
        g = G @ b - c + lam * np.sign(b)
        b = b - (0.5 / np.sqrt(k)) * g
        if k % 1000 == 0:
            r = y - X @ b
            obj = r @ r / (2 * n) + lam * np.abs(b).sum()
            best = obj if best is None else min(best, obj)
    return best


@pytest.mark.parametrize("z, t, expected", [(5, 2, 3), (-1, 2, 0), (-5, 2, -3), (0.5, 0, 0.5)])
def test_soft_threshold(z, t, expected):
    assert soft_threshold(z, t) == expected


def test_soft_threshold_rejects_negative():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_zero_solution_above_lambda_max():
    rng = np.random.default_rng(0)
    X = normalize_columns(rng.standard_normal((30, 8)))
    y = rng.standard_normal(30)
    lm = lambda_max(X, y)
    fit = fit_lasso(X, y, lm * 1.01)
    assert not np.any(fit.beta)
    assert fit.active_set.size == 0 and fit.signs.size == 0
    assert fit.converged


def test_orthogonal_design_matches_soft_threshold():
    rng = np.random.default_rng(1)
    for _ in range(20):
        X = orthogonal_design(rng, 40, 10)
        y = X.values @ rng.standard_normal(10) + rng.standard_normal(40)
        lam = 0.3 * lambda_max(X, y)
        fit = fit_lasso(X, y, lam)
        expected = soft_threshold(X.values.T @ y / 40, lam)
        np.testing.assert_allclose(fit.beta, expected, atol=1e-9, rtol=0)


def test_small_instance_against_enumeration_random_candidates_and_subgradient():
    rng = np.random.default_rng(2)
    X = normalize_columns(rng.standard_normal((10, 3)))
    y = X.values @ np.array([1.0, -2.0, 0.0]) + 0.5 * rng.standard_normal(10)
    lam = 0.2
    fit = fit_lasso(X, y, lam)
    obj = lasso_objective(X, y, fit.beta, lam)

    exact, exact_obj = enumerate_lasso(X.values, y, lam)
    np.testing.assert_allclose(fit.beta, exact, atol=1e-8)
    assert obj <= exact_obj + 1e-8

    cands = fit.beta + rng.standard_normal((10_000, 3)) * rng.choice([1e-3, 1e-1, 1.0], (10_000, 1))
    r = y[None, :] - cands @ X.values.T
    cand_obj = (r * r).sum(axis=1) / 20 + lam * np.abs(cands).sum(axis=1)
    assert obj <= cand_obj.min() + 1e-8

    ref = subgradient_reference(X.values, y, lam)
    assert obj <= ref + 1e-8


def test_kkt_certificate_and_equicorrelation():
    rng = np.random.default_rng(3)
    X = normalize_columns(rng.standard_normal((50, 80)))
    b0 = np.zeros(80)
    b0[:4] = [2, -1.5, 1, -1]
    y = X.values @ b0 + 0.3 * rng.standard_normal(50)
    lam = 0.1 * lambda_max(X, y)
    fit = fit_lasso(X, y, lam)
    assert fit.converged
    c = X.values.T @ fit.residual / 50
    assert np.abs(c).max() <= lam + 1e-7
    nz = np.abs(fit.beta) > 1e-9
    np.testing.assert_allclose(c[nz], lam * np.sign(fit.beta[nz]), atol=1e-7)
    assert set(np.flatnonzero(nz)) <= set(fit.active_set)
    E, s = equicorrelation(fit, X, y)
    assert np.array_equal(E, fit.active_set)
    assert np.array_equal(s, np.sign(fit.beta[E]))
    assert fit.kkt_slack == pytest.approx(kkt_slack(X, fit.residual, fit.beta, lam))


def test_equicorrelation_single_positive():
    X = normalize_columns(np.array([[1.0, 0.2], [1.0, -0.1], [1.0, 0.3], [1.0, -0.4]]))
    y = np.array([2.0, 2.1, 1.9, 2.0])
    lam = 0.5 * lambda_max(X, y)
    fit = fit_lasso(X, y, lam)
    E, s = equicorrelation(fit, X, y)
    assert E.tolist() == [0] and s.tolist() == [1.0]


def test_equicorrelation_two_active_matches_enumeration_signs():
    rng = np.random.default_rng(4)
    X = normalize_columns(rng.standard_normal((20, 3)))
    y = X.values @ np.array([1.5, -1.0, 0.0]) + 0.1 * rng.standard_normal(20)
    lam = 0.3
    fit = fit_lasso(X, y, lam)
    exact, _ = enumerate_lasso(X.values, y, lam)
    E, s = equicorrelation(fit, X, y)
    assert E.tolist() == np.flatnonzero(exact).tolist() == [0, 1]
    assert s.tolist() == np.sign(exact[E]).tolist()


def test_boundary_coordinate_included_in_E():
    rng = np.random.default_rng(5)
    X = normalize_columns(rng.standard_normal((25, 6)))
    y = rng.standard_normal(25)
    lm = lambda_max(X, y)
    fit = fit_lasso(X, y, lm)
    assert not np.any(fit.beta)
    assert fit.active_set.size == 1
    assert fit.support_mismatch


def test_input_validation():
    X = normalize_columns(np.random.default_rng(0).standard_normal((5, 2)))
    with pytest.raises(ValueError):
        fit_lasso(X, np.ones(4), 0.1)
    with pytest.raises(ValueError):
        fit_lasso(X, np.array([1, 2, np.nan, 4, 5.0]), 0.1)
    with pytest.raises(ValueError):
        fit_lasso(X, np.ones(5), 0.0)
    with pytest.raises(ValueError):
        fit_lasso(DesignMatrix(np.ones((5, 2)) * 2), np.ones(5), 0.1)


def test_nonconvergence_reported():
    rng = np.random.default_rng(6)
    X = normalize_columns(rng.standard_normal((30, 60)))
    y = rng.standard_normal(30)
    fit = fit_lasso(X, y, 1e-3 * lambda_max(X, y), LassoSettings(max_iterations=2), beta_init=np.zeros(60))
    assert not fit.converged
    assert fit.iterations <= 2


def test_objective_monotone_per_sweep_in_debug_mode():
    rng = np.random.default_rng(7)
    X = normalize_columns(rng.standard_normal((40, 30)))
    y = X.values[:, :3].sum(axis=1) + rng.standard_normal(40)
    fit = fit_lasso(X, y, 0.05 * lambda_max(X, y), LassoSettings(debug=True))
    assert fit.converged


def test_path_first_point_zero_and_single_point():
    rng = np.random.default_rng(8)
    X = normalize_columns(rng.standard_normal((30, 40)))
    y = X.values[:, 0] + rng.standard_normal(30)
    lm = lambda_max(X, y)
    fits = lasso_path(X, y, [lm, 0.5 * lm])
    assert not np.any(fits[0].beta)
    single = lasso_path(X, y, [0.3 * lm])
    np.testing.assert_allclose(single[0].beta, fit_lasso(X, y, 0.3 * lm).beta, atol=1e-9)
    with pytest.raises(ValueError):
        lasso_path(X, y, [0.1, 0.2])


def test_path_matches_cold_starts():
    rng = np.random.default_rng(9)
    X = normalize_columns(rng.standard_normal((60, 120)))
    b0 = np.zeros(120)
    b0[:5] = 1
    y = X.values @ b0 + 0.5 * rng.standard_normal(60)
    lams = lambda_max(X, y) * np.logspace(0, -3, 20)
    for lam, fit in zip(lams, lasso_path(X, y, lams)):
        cold = fit_lasso(X, y, lam)
        assert fit.converged and cold.converged
        assert lasso_objective(X, y, fit.beta, lam) == pytest.approx(
            lasso_objective(X, y, cold.beta, lam), abs=1e-8)
