"""Randomized checks of the Lasso certificates and the refit guarantees.

Every instance is generated from ``Rng(seed, index)`` so any failure can be
replayed from the two integers alone; failing instances are additionally
serialized in full.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DesignMatrix, Rng, TrueModel, gaussian_vector, infinity_operator_norm, restricted_gram, spectral_norm
from .lasso import fit_lasso
from .refit import (
    default_lambda_r,
    empirical_risk_reduction_check,
    improvement_certificate,
    lemma_norm_gap,
    refit_closed_form,
    refit_direct_solve,
    ridge_objective_gap,
    sign_preservation_check,
)
from .simulate import ar1_design, true_beta
from .tuning import lambda_l_grid

KKT_TOL = 1e-7
AGREEMENT_TOL = 1e-8


@dataclass
class Instance:
    seed: int
    index: int
    n: int
    p: int
    rho: float
    sigma: float
    s_true: int
    lambda_index: int
    X: DesignMatrix = field(repr=False)
    y: np.ndarray = field(repr=False)
    beta0: np.ndarray = field(repr=False)
    eps: np.ndarray = field(repr=False)
    lam: float = 0.0

    def to_dict(self, full=False):
        d = dict(seed=self.seed, index=self.index, n=self.n, p=self.p, rho=self.rho,
                 sigma=self.sigma, s_true=self.s_true, lambda_index=self.lambda_index, lam=self.lam)
        if full:
            d.update(X=self.X.values.tolist(), y=self.y.tolist(), beta0=self.beta0.tolist(),
                     eps=self.eps.tolist())
        return d


def random_instance(seed, index, n_range=(20, 100), p_range=(10, 400),
                    rhos=(0.0, 0.5, 0.9), sigmas=(0.1, 1.0), grid_size=20) -> Instance:
    """AR(1) design, unit sparse signal, penalty drawn from the standard 20-point grid."""
    rng = Rng(seed, index)
    g = rng.generator
    n = int(g.integers(n_range[0], n_range[1] + 1))
    p = int(g.integers(p_range[0], p_range[1] + 1))
    rho = float(g.choice(rhos))
    sigma = float(g.choice(sigmas))
    s_true = int(g.integers(1, min(10, p) + 1))
    X = ar1_design(rng, n, p, rho)
    b0 = true_beta("unit_first_s", p, s_true)
    eps = gaussian_vector(rng, n, sigma)
    y = X.values @ b0 + eps
    k = int(g.integers(0, grid_size))
    lam = float(lambda_l_grid(X, y, grid_size)[k])
    return Instance(seed, index, n, p, rho, sigma, s_true, k, X, y, b0, eps, lam)


@dataclass
class CheckReport:
    violations: list = field(default_factory=list)
    info: list = field(default_factory=list)
    checked: int = 0
    active_sizes: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations


def check_instance(inst: Instance, settings=None, lambda_r=None):
    """Run all checks on one instance.

    Returns ``(violations, info, fit)``; the first two are lists of strings.
    """
    X, y = inst.X, inst.y
    bad, info = [], []
    fit = fit_lasso(X, y, inst.lam, settings)
    if not fit.converged:
        bad.append(f"lasso did not converge (slack {fit.kkt_slack:.3g}, {fit.iterations} sweeps)")
        return bad, info, fit
    c = X.values.T @ fit.residual / X.n
    if np.abs(c).max() > fit.lam + KKT_TOL:
        bad.append("KKT: correlation exceeds lambda")
    nz = np.abs(fit.beta) > 1e-9
    if nz.any() and np.abs(c[nz] - fit.lam * np.sign(fit.beta[nz])).max() > KKT_TOL:
        bad.append("KKT: active correlation differs from lambda * sign(beta)")
    if fit.support_mismatch:
        info.append(f"numeric support {fit.support.tolist()} differs from E {fit.active_set.tolist()}")

    E = fit.active_set
    S = restricted_gram(X, E)
    if E.size:
        two, inf = spectral_norm(S), infinity_operator_norm(S)
        if two > inf * (1 + 1e-12):
            bad.append(f"spectral norm {two!r} exceeds infinity norm {inf!r}")

    lam_r = default_lambda_r(X, E) if lambda_r is None else lambda_r
    rc = refit_closed_form(X, fit, lam_r)
    rd = refit_direct_solve(X, y, fit, lam_r)
    diff = float(np.abs(rc.delta - rd.delta).max())
    if diff > AGREEMENT_TOL:
        bad.append(f"P5: closed form and direct solve differ by {diff:.3g}")

    holds, gap = empirical_risk_reduction_check(X, y, fit, rc)
    if not holds:
        bad.append(f"P1: residual norm increased by {-gap:.3g}")
    if ridge_objective_gap(X, y, fit, rd) < -1e-9:
        bad.append("P1: ridge objective exceeds the objective at delta = 0")

    if rc.safe:
        if not sign_preservation_check(fit, rc):
            bad.append("P2: refit changed a sign")
        if lemma_norm_gap(fit, rc) < -1e-12:
            bad.append(f"P3: norm inequality violated by {-lemma_norm_gap(fit, rc):.3g}")
    cert = improvement_certificate(X, TrueModel(inst.beta0, inst.sigma), inst.eps, fit, rc)
    if not cert.holds:
        bad.append(f"P4: gap {cert.lhs_gap!r} below remainder {cert.remainder!r}")
    if cert.safe and cert.condition_met:
        el = np.linalg.norm(X.values @ (fit.beta - inst.beta0))
        er = np.linalg.norm(X.values @ (rc.beta_r - inst.beta0))
        if er > el + 1e-9:
            bad.append("P4: refit increased the prediction error")

    if E.size:
        norms = []
        lr = max(rc.min_safe_lambda_r, 1.0) * (1 + 1e-6)
        while lr < 1e9:
            norms.append(np.linalg.norm(refit_closed_form(X, fit, lr).delta))
            lr *= 10
        if np.any(np.diff(norms) > 1e-15):
            bad.append("P6: correction norm increased with lambda_r")
        far = refit_closed_form(X, fit, 1e8)
        if np.abs(far.beta_r - fit.beta).max() > 1e-5 * (1 + np.abs(fit.beta).max()):
            bad.append("P6: refit at lambda_r = 1e8 does not reduce to the Lasso")

        unsafe = refit_closed_form(X, fit, 0.5 * rc.min_safe_lambda_r)
        if not sign_preservation_check(fit, unsafe):
            info.append("unsafe lambda_r flipped a sign (allowed)")
    return bad, info, fit


def run_invariant_suite(count=500, seed=0, settings=None, **instance_kw) -> CheckReport:
    rep = CheckReport()
    for i in range(count):
        inst = random_instance(seed, i, **instance_kw)
        try:
            bad, info, fit = check_instance(inst, settings)
        except Exception as exc:
            bad, info, fit = [f"{type(exc).__name__}: {exc}"], [], None
        rep.checked += 1
        if fit is not None:
            rep.active_sizes.append(int(fit.active_set.size))
        for msg in info:
            rep.info.append((inst.to_dict(), msg))
        if bad:
            rep.violations.append((inst.to_dict(full=True), bad))
    return rep


def theorem_instance(seed, index, n=100, p=200, s_true=5, rho=0.0, sigma=1.0, inflate=1.2):
    """Instance whose Lasso penalty is ``inflate * 3 ||X^T eps / n||_inf``."""
    rng = Rng(seed, index)
    X = ar1_design(rng, n, p, rho)
    b0 = true_beta("unit_first_s", p, s_true)
    eps = gaussian_vector(rng, n, sigma)
    y = X.values @ b0 + eps
    lam = inflate * 3.0 * float(np.abs(X.values.T @ eps).max() / n)
    return X, y, b0, eps, lam
