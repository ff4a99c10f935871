import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lassoridge.core import DesignMatrix, TrueModel, normalize_columns
from lassoridge.invariants import random_instance, theorem_instance
from lassoridge.lasso import fit_lasso, lambda_max
from lassoridge.refit import (
    ImprovementCertificate,
    default_lambda_r,
    empirical_risk_reduction_check,
    improvement_certificate,
    lemma_norm_gap,
    min_safe_lambda_r,
    refit_closed_form,
    refit_direct_solve,
    ridge_objective_gap,
    sign_preservation_check,
)


def sparse_problem(seed, n=60, p=90, s=4, sigma=0.5, frac=0.1):
    rng = np.random.default_rng(seed)
    X = normalize_columns(rng.standard_normal((n, p)))
    b0 = np.zeros(p)
    b0[:s] = 1.0
    eps = sigma * rng.standard_normal(n)
    y = X.values @ b0 + eps
    fit = fit_lasso(X, y, frac * lambda_max(X, y))
    return X, y, b0, eps, fit


def test_min_safe_lambda_r_examples():
    # columns with inner product / n = 0.5, so Sigma = [[1, .5], [.5, 1]]
    X = DesignMatrix(np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, -1.0]]), normalized=True)
    assert min_safe_lambda_r(X, []) == 0.0
    assert min_safe_lambda_r(X, [0]) == 2.0
    assert min_safe_lambda_r(X, [0, 1]) == 3.0
    assert default_lambda_r(X, []) == 1.0
    assert default_lambda_r(X, [0, 1]) == pytest.approx(3.0 * (1 + 1e-6), rel=1e-15)


def test_single_active_coordinate_closed_form():
    X = normalize_columns(np.array([[1.0, 0.2], [1.0, -0.1], [1.0, 0.3], [1.0, -0.4]]))
    y = np.array([2.0, 2.1, 1.9, 2.0])
    fit = fit_lasso(X, y, 0.5 * lambda_max(X, y))
    assert fit.active_set.tolist() == [0]
    for lr in (0.1, 2.5, 40.0):
        d = refit_closed_form(X, fit, lr).delta
        assert d[0] == pytest.approx(fit.lam / (1 + lr), rel=1e-12)
        assert d[1] == 0.0


def test_empty_active_set():
    rng = np.random.default_rng(0)
    X = normalize_columns(rng.standard_normal((20, 5)))
    y = rng.standard_normal(20)
    fit = fit_lasso(X, y, 2 * lambda_max(X, y))
    for solver in (lambda: refit_closed_form(X, fit), lambda: refit_direct_solve(X, y, fit)):
        res = solver()
        assert not np.any(res.delta)
        assert np.array_equal(res.beta_r, fit.beta)
        assert res.lambda_r == 1.0


def test_rejects_bad_lambda_r():
    X, y, _, _, fit = sparse_problem(1)
    for bad in (0.0, -1.0, np.inf, np.nan):
        with pytest.raises(ValueError):
            refit_closed_form(X, fit, bad)


def test_closed_form_matches_direct_solve_on_random_instances():
    for i in range(100):
        inst = random_instance(11, i, n_range=(20, 60), p_range=(10, 120))
        fit = fit_lasso(inst.X, inst.y, inst.lam)
        rc = refit_closed_form(inst.X, fit)
        rd = refit_direct_solve(inst.X, inst.y, fit)
        assert np.abs(rc.delta - rd.delta).max() <= 1e-8, i


def test_large_lambda_r_recovers_lasso():
    X, y, _, _, fit = sparse_problem(2)
    res = refit_closed_form(X, fit, 1e8)
    assert np.abs(res.beta_r - fit.beta).max() <= 1e-5 * (1 + np.abs(fit.beta).max())


def test_tiny_lambda_r_gives_least_squares_on_E():
    X, y, _, _, fit = sparse_problem(3, frac=0.2)
    E = fit.active_set
    assert E.size and not fit.support_mismatch
    XE = X.values[:, E]
    ls = np.linalg.solve(XE.T @ XE, XE.T @ y)
    res = refit_closed_form(X, fit, 1e-8)
    assert not res.safe
    np.testing.assert_allclose(res.beta_r[E], ls, rtol=1e-6, atol=1e-7)


def test_risk_reduction_and_objective_gap():
    for seed in range(10):
        X, y, _, _, fit = sparse_problem(seed)
        for lr in (None, 0.01, 1.0, 100.0):
            rc = refit_closed_form(X, fit, lr)
            holds, gap = empirical_risk_reduction_check(X, y, fit, rc)
            assert holds and gap >= -1e-9
            assert ridge_objective_gap(X, y, fit, rc) >= -1e-9


def test_certificate_remainder_vanishes_at_boundary():
    X, y, b0, eps, lam = theorem_instance(5, 0, n=60, p=80, inflate=1.0)
    fit = fit_lasso(X, y, lam)
    rc = refit_closed_form(X, fit)
    cert = improvement_certificate(X, TrueModel(b0, 1.0), eps, fit, rc)
    assert cert.noise_sup * 3 == pytest.approx(lam, rel=1e-14)
    assert abs(cert.remainder) <= 1e-12 * max(1.0, rc.lambda_r * (rc.delta @ rc.delta))


def test_certificate_holds_when_condition_met():
    for i in range(20):
        X, y, b0, eps, lam = theorem_instance(7, i, n=80, p=120)
        fit = fit_lasso(X, y, lam)
        rc = refit_closed_form(X, fit)
        cert = improvement_certificate(X, TrueModel(b0, 1.0), eps, fit, rc)
        assert cert.condition_met and cert.safe
        assert cert.remainder >= 0
        assert cert.lhs_gap >= cert.remainder - 1e-9


def test_certificate_vacuous_outside_conditions():
    assert ImprovementCertificate(-1.0, 1.0, 1.0, False, True).holds
    assert ImprovementCertificate(-1.0, 1.0, 1.0, True, False).holds
    assert not ImprovementCertificate(-1.0, 1.0, 1.0, True, True).holds


def test_sign_preservation_at_safe_penalty():
    for seed in range(15):
        X, y, _, _, fit = sparse_problem(seed, frac=0.05)
        rc = refit_closed_form(X, fit)
        assert rc.safe
        assert sign_preservation_check(fit, rc)
        E = fit.active_set
        np.testing.assert_array_equal(np.sign(rc.delta[E]), fit.signs)
        assert lemma_norm_gap(fit, rc) >= -1e-12


def test_sign_check_detects_flip():
    X, y, _, _, fit = sparse_problem(4)
    rc = refit_closed_form(X, fit)
    E = fit.active_set
    delta = rc.delta.copy()
    delta[E[0]] = -delta[E[0]]
    flipped = type(rc)(delta, fit.beta + delta, rc.lambda_r, rc.min_safe_lambda_r, rc.safe, rc.method)
    assert not sign_preservation_check(fit, flipped)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.0, 1e6))
def test_correction_norm_decreases_in_lambda_r(seed, scale):
    X, y, _, _, fit = sparse_problem(seed, n=30, p=40)
    if fit.active_set.size == 0:
        return
    base = default_lambda_r(X, fit.active_set)
    lo = np.linalg.norm(refit_closed_form(X, fit, base * scale).delta)
    hi = np.linalg.norm(refit_closed_form(X, fit, base * scale * 10).delta)
    assert hi <= lo * (1 + 1e-12)
    assert lemma_norm_gap(fit, refit_closed_form(X, fit, base * scale)) >= -1e-12
