"""Monte Carlo comparisons of the Lasso and Lasso-Ridge.

Three protocols are provided:

* :func:`run_scenario` -- synthetic AR(1) Gaussian designs with a sparse
  unit signal, both estimators tuned by 5-fold CV, replicated.
* :func:`run_semi_synthetic` -- a fixed design (from CSV or an array) with a
  synthetic sparse signal; repeated random 70/30 train/test splits.
* :func:`run_real_data` -- a design and response from CSV, repeated random
  train/test splits with an intercept.

All randomness is derived from a single seed. Replication ``r`` uses the
stream ``Rng(seed, r)``, so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import DesignMatrix, Rng, TrueModel, gaussian_vector, normalize_columns, normalize_with_scale
from .lasso import LassoSettings, fit_lasso, lambda_max
from .refit import default_lambda_r, improvement_certificate, refit_closed_form
from .tuning import Grid, cross_validate_pair, fold_assignment, lambda_r_grid, theoretical_lambda_l

log = logging.getLogger(__name__)

DEFAULT_SEED = 20240601
BETA_STREAM = 2**32 - 1
IN_SAMPLE = "in_sample"
OUT_OF_SAMPLE = "out_of_sample"
TEST_MSE = "test_mse"


@dataclass(frozen=True)
class ScenarioConfig:
    """One cell of the simulation grid.

    ``s_true`` is the number of leading unit coefficients. Passing ``beta``
    overrides that scheme with a custom coefficient vector of length ``p``.
    ``prediction`` selects the in-sample signal error ``||X(b - b0)||^2 / n``
    or the same quantity on a fresh design drawn from the same distribution.
    """

    n: int
    p: int
    s_true: int
    rho: float = 0.0
    sigma: float = 1.0
    replications: int = 100
    folds: int = 5
    seed: int = DEFAULT_SEED
    beta: Optional[tuple] = None
    n_lambda_l: int = 20
    n_lambda_r: int = 10
    prediction: str = IN_SAMPLE

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if not 0 <= self.s_true <= self.p:
            raise ValueError("s_true must lie in [0, p]")
        if not -1 < self.rho < 1:
            raise ValueError("rho must satisfy |rho| < 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.prediction not in (IN_SAMPLE, OUT_OF_SAMPLE):
            raise ValueError(f"unknown prediction mode {self.prediction!r}")
        if self.beta is not None and len(self.beta) != self.p:
            raise ValueError(f"custom beta has length {len(self.beta)}, expected {self.p}")

    def beta0(self) -> np.ndarray:
        if self.beta is not None:
            return true_beta("custom", self.p, self.s_true, custom=self.beta)
        return true_beta("unit_first_s", self.p, self.s_true)


@dataclass(frozen=True)
class SemiSyntheticSpec:
    """Fixed-design experiment; ``design`` is a CSV path or an array."""

    design: object
    beta_case: int = 1
    noise_sd: float = 1.0
    train_fraction: float = 0.7
    rounds: int = 100
    seed: int = DEFAULT_SEED
    folds: int = 5
    header: bool = False
    label: str = ""

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.beta_case not in (1, 2, 3):
            raise ValueError("beta_case must be 1, 2 or 3")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")


@dataclass
class ReplicationRecord:
    index: int
    pred_lasso: float = math.nan
    pred_new: float = math.nan
    est_lasso: float = math.nan
    est_new: float = math.nan
    lambda_l_lasso: float = math.nan
    lambda_l_new: float = math.nan
    lambda_r_new: float = math.nan
    nonconverged: bool = False
    error: Optional[str] = None


def improvement_pct(mse_lasso, mse_new):
    """``100 (mse_lasso / mse_new - 1)`` and a flag for a degenerate denominator.

    A zero or non-finite denominator yields ``(nan, True)``.
    """
    if not (np.isfinite(mse_lasso) and np.isfinite(mse_new)) or mse_new == 0:
        return math.nan, True
    return 100.0 * (mse_lasso / mse_new - 1.0), False


@dataclass
class ImprovementReport:
    """Aggregated errors of both estimators over replications.

    For ``kind == "test_mse"`` the ``pred`` fields hold held-out test MSE.
    Estimation errors are NaN when the true coefficients are unknown.
    """

    label: dict
    kind: str
    records: list = field(default_factory=list)
    mean_pred_mse_lasso: float = math.nan
    mean_pred_mse_new: float = math.nan
    mean_est_mse_lasso: float = math.nan
    mean_est_mse_new: float = math.nan
    sd_pred_mse_lasso: float = math.nan
    sd_pred_mse_new: float = math.nan
    sd_est_mse_lasso: float = math.nan
    sd_est_mse_new: float = math.nan
    pred_improvement_pct: float = math.nan
    est_improvement_pct: float = math.nan
    pred_degenerate: bool = True
    est_degenerate: bool = True
    failures: int = 0

    @classmethod
    def from_records(cls, label, kind, records):
        rep = cls(label=dict(label), kind=kind, records=sorted(records, key=lambda r: r.index))
        ok = [r for r in rep.records if r.error is None]
        rep.failures = len(rep.records) - len(ok)
        if ok:
            cols = {k: np.array([getattr(r, k) for r in ok]) for k in
                    ("pred_lasso", "pred_new", "est_lasso", "est_new")}
            ddof = 1 if len(ok) > 1 else 0
            for key, arr in cols.items():
                kind_, meth = key.split("_")
                setattr(rep, f"mean_{kind_}_mse_{meth}", float(np.mean(arr)))
                setattr(rep, f"sd_{kind_}_mse_{meth}", float(np.std(arr, ddof=ddof)))
        rep.pred_improvement_pct, rep.pred_degenerate = improvement_pct(
            rep.mean_pred_mse_lasso, rep.mean_pred_mse_new)
        rep.est_improvement_pct, rep.est_degenerate = improvement_pct(
            rep.mean_est_mse_lasso, rep.mean_est_mse_new)
        return rep


# -- data generation ---------------------------------------------------------

def _ar1_raw(rng: Rng, n, p, rho):
    z = rng.generator.standard_normal((n, p))
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        x[:, j] = rho * x[:, j - 1] + c * z[:, j]
    return x


def ar1_design(rng: Rng, n, p, rho) -> DesignMatrix:
    """Rows i.i.d. ``N(0, Sigma)`` with ``Sigma_ij = rho^|i-j|``, then column-normalized.

    Built column by column from ``x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j``,
    which has exactly this covariance.
    """
    if not -1 < rho < 1:
        raise ValueError("rho must satisfy |rho| < 1")
    return normalize_columns(_ar1_raw(rng, n, p, rho))


def true_beta(scheme, p, s_true, custom=None) -> np.ndarray:
    """``unit_first_s``: ones in the first ``s_true`` entries; ``custom``: passthrough."""
    if scheme == "custom":
        b = np.asarray(custom, dtype=np.float64).ravel()
        if b.shape[0] != p:
            raise ValueError(f"custom beta has length {b.shape[0]}, expected {p}")
        return b.copy()
    if scheme != "unit_first_s":
        raise ValueError(f"unknown beta scheme {scheme!r}")
    if not 0 <= s_true <= p:
        raise ValueError("s_true must lie in [0, p]")
    b = np.zeros(p)
    b[:s_true] = 1.0
    return b


def beta_case_semi(case, p, rng: Rng) -> np.ndarray:
    """Sparse signals for the fixed-design experiment.

    1. entries 1-5 ~ Unif(3, 4), entries 6-10 ~ Unif(1, 2);
    2. ``5 / sqrt(j)`` for ``j = 1..10``;
    3. entries 1-20 ~ Unif(1, 2).
    """
    if p < 20:
        raise ValueError("p must be at least 20")
    b = np.zeros(p)
    g = rng.generator
    if case == 1:
        b[:5] = g.uniform(3.0, 4.0, 5)
        b[5:10] = g.uniform(1.0, 2.0, 5)
    elif case == 2:
        b[:10] = 5.0 / np.sqrt(np.arange(1, 11))
    elif case == 3:
        b[:20] = g.uniform(1.0, 2.0, 20)
    else:
        raise ValueError("case must be 1, 2 or 3")
    return b


def standin_design(rng: Rng, n=38, p=3051, rho=0.5) -> np.ndarray:
    """Synthetic AR(1) stand-in with the shape of a small gene-expression matrix.

    Not real data; useful when no design file is at hand.
    """
    return _ar1_raw(rng, n, p, rho)


# -- fitting helpers ---------------------------------------------------------

def _fit_pair(X: DesignMatrix, y, folds, rng: Rng, n_l, n_r, settings=None):
    """CV both estimators; returns ``(beta_lasso, beta_new, record_fields)``.

    Falls back to zero coefficients when ``X^T y = 0`` (no penalty grid
    exists and the zero solution is optimal for every penalty).
    """
    if lambda_max(X, y) == 0:
        z = np.zeros(X.p)
        return z, z.copy(), {}
    top = lambda_max(X, y)
    grid = Grid(top * np.logspace(0.0, -3.0, n_l), lambda_r_grid(X.n, n_r))
    assignment = fold_assignment(X.n, folds, rng)
    las, lr = cross_validate_pair(X, y, grid, assignment=assignment, settings=settings)
    info = dict(
        lambda_l_lasso=las.best_lambda_l,
        lambda_l_new=lr.best_lambda_l,
        lambda_r_new=lr.best_lambda_r,
        nonconverged=bool(las.nonconverged.any() or not las.fit.converged or not lr.fit.converged),
    )
    return las.beta, lr.beta, info


def _replicate(cfg: ScenarioConfig, r: int) -> ReplicationRecord:
    rng = Rng(cfg.seed, r)
    rec = ReplicationRecord(index=r)
    try:
        X, scale = normalize_with_scale(_ar1_raw(rng, cfg.n, cfg.p, cfg.rho))
        b0 = cfg.beta0()
        eps = gaussian_vector(rng, cfg.n, cfg.sigma)
        y = X.values @ b0 + eps
        bl, bn, info = _fit_pair(X, y, cfg.folds, rng, cfg.n_lambda_l, cfg.n_lambda_r)
        for k, v in info.items():
            setattr(rec, k, v)
        if cfg.prediction == OUT_OF_SAMPLE:
            # fresh rows, mapped with the training column scaling
            Xp = _ar1_raw(rng, cfg.n, cfg.p, cfg.rho) * scale
        else:
            Xp = X.values
        dl, dn = Xp @ (bl - b0), Xp @ (bn - b0)
        rec.pred_lasso = float(dl @ dl / Xp.shape[0])
        rec.pred_new = float(dn @ dn / Xp.shape[0])
        rec.est_lasso = float(np.sum((bl - b0) ** 2))
        rec.est_new = float(np.sum((bn - b0) ** 2))
    except Exception as exc:  # recorded, the run continues
        log.warning("replication %d failed: %s", r, exc)
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _map_indexed(func, count, threads):
    if threads is None or threads <= 1:
        return [func(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, range(count)))


def scenario_label(cfg: ScenarioConfig) -> dict:
    return dict(n=cfg.n, p=cfg.p, s=cfg.s_true, rho=cfg.rho, sigma=cfg.sigma,
                reps=cfg.replications, seed=cfg.seed, prediction=cfg.prediction)


def run_scenario(cfg: ScenarioConfig, threads=1) -> ImprovementReport:
    """Replicate one simulation cell and aggregate prediction and estimation errors.

    Each replication draws a fresh design, noise and folds, selects both
    estimators by cross-validation and records the prediction error
    ``||X(b - b0)||^2 / n`` and estimation error ``||b - b0||^2``. Failed
    replications are recorded with their error message and skipped in the
    averages.
    """
    records = _map_indexed(lambda r: _replicate(cfg, r), cfg.replications, threads)
    kind = IN_SAMPLE if cfg.prediction == IN_SAMPLE else OUT_OF_SAMPLE
    return ImprovementReport.from_records(scenario_label(cfg), kind, records)


# -- train/test protocols ----------------------------------------------------

def _split(rng: Rng, n, train_fraction, folds):
    n_train = int(round(train_fraction * n))
    if n_train < folds or n_train >= n:
        raise ValueError(f"train fraction {train_fraction} leaves {n_train} of {n} rows for training")
    perm = rng.generator.permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _train_test_round(Xraw, y, rng: Rng, train_fraction, folds, center):
    """One random split; returns test MSEs and raw-scale coefficients of both methods."""
    train, test = _split(rng, Xraw.shape[0], train_fraction, folds)
    Xtr, ytr = Xraw[train], y[train]
    if center:
        xm, ym = Xtr.mean(axis=0), ytr.mean()
    else:
        xm, ym = np.zeros(Xraw.shape[1]), 0.0
    Xn, scale = normalize_with_scale(Xtr - xm)
    bl, bn, info = _fit_pair(Xn, ytr - ym, folds, rng, 20, 10)
    bl, bn = bl * scale, bn * scale
    Xte = Xraw[test] - xm
    rl = y[test] - ym - Xte @ bl
    rn = y[test] - ym - Xte @ bn
    return float(rl @ rl / rl.size), float(rn @ rn / rn.size), bl, bn, info


def load_csv(path, response=None, header=False):
    """Read a numeric CSV into ``(X, y, names)``.

    ``response`` is a column name (needs ``header``) or 0-based index;
    ``None`` means there is no response and ``y`` is returned as ``None``.
    Empty or non-numeric cells raise ``ValueError`` naming the row and column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no data")
    names = [c.strip() for c in rows[0]] if header else [f"x{j}" for j in range(len(rows[0]))]
    body = rows[1:] if header else rows
    width = len(names)
    data = np.empty((len(body), width))
    for i, row in enumerate(body):
        line = i + (2 if header else 1)
        if len(row) != width:
            raise ValueError(f"{path}: row {line} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ValueError(f"{path}: row {line}, column {j} ({names[j]}): not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise ValueError(f"{path}: row {line}, column {j} ({names[j]}): missing or non-finite value")
            data[i, j] = v
    if response is None:
        return data, None, names
    if isinstance(response, str) and not response.lstrip("-").isdigit():
        if response not in names:
            raise ValueError(f"{path}: no column named {response!r}")
        k = names.index(response)
    else:
        k = int(response) % width
    y = data[:, k]
    X = np.delete(data, k, axis=1)
    return X, y, names[:k] + names[k + 1:]


def _load_design(design, header):
    if isinstance(design, (str, bytes)) or hasattr(design, "__fspath__"):
        X, _, _ = load_csv(design, None, header)
        return X
    return np.asarray(design, dtype=np.float64)


def _aggregate_rounds(label, rounds):
    records = []
    for i, (ml, mn, bl, bn, info, b0) in enumerate(rounds):
        rec = ReplicationRecord(index=i, pred_lasso=ml, pred_new=mn, **info)
        if b0 is not None:
            rec.est_lasso = float(np.sum((bl - b0) ** 2))
            rec.est_new = float(np.sum((bn - b0) ** 2))
        records.append(rec)
    return ImprovementReport.from_records(label, TEST_MSE, records)


def run_semi_synthetic(spec: SemiSyntheticSpec, threads=1) -> ImprovementReport:
    """Fixed design, synthetic sparse response, repeated random train/test splits.

    The design is column-normalized once. The true coefficients are drawn
    once before the rounds; each round draws new noise, a new split and new
    CV folds, and records the test-set MSE of both methods.
    """
    raw = _load_design(spec.design, spec.header)
    if raw.shape[0] < 10:
        raise ValueError(f"design has {raw.shape[0]} rows; need at least 10")
    X = normalize_columns(raw)
    b0 = beta_case_semi(spec.beta_case, X.p, Rng(spec.seed, BETA_STREAM))

    def one(r):
        rng = Rng(spec.seed, r)
        y = X.values @ b0 + gaussian_vector(rng, X.n, spec.noise_sd)
        return _train_test_round(X.values, y, rng, spec.train_fraction, spec.folds, center=False) + (b0,)

    label = dict(n=X.n, p=X.p, case=spec.beta_case, rounds=spec.rounds, seed=spec.seed,
                 design=spec.label or (str(spec.design) if isinstance(spec.design, str) else "array"))
    return _aggregate_rounds(label, _map_indexed(one, spec.rounds, threads))


def run_real_data(path, response=-1, train_fraction=0.7, rounds=100, seed=DEFAULT_SEED,
                  header=True, folds=5, threads=1, data=None) -> ImprovementReport:
    """Repeated random train/test splits on observed data.

    Training rows are centered and column-normalized on their own
    statistics (an unpenalized intercept), and the same transform is
    applied to the test rows. ``data=(X, y)`` bypasses the file.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    if data is None:
        Xraw, y, _ = load_csv(path, response, header)
    else:
        Xraw, y = (np.asarray(a, dtype=np.float64) for a in data)

    def one(r):
        rng = Rng(seed, r)
        return _train_test_round(Xraw, y, rng, train_fraction, folds, center=True) + (None,)

    label = dict(n=Xraw.shape[0], p=Xraw.shape[1], rounds=rounds, seed=seed,
                 source=str(path) if data is None else "array")
    return _aggregate_rounds(label, _map_indexed(one, rounds, threads))


# -- theory checks -----------------------------------------------------------

@dataclass
class TheoryCheck:
    """Frequency of the prediction-improvement event at the theoretical penalty."""

    frequency: float
    replications: int
    lambda_l: float
    improved: np.ndarray
    condition_met: np.ndarray
    certificates_hold: bool


def run_theory_check(n=100, p=100, s_true=5, sigma=1.0, rho=0.0, alpha=0.1,
                     replications=200, seed=DEFAULT_SEED, settings: LassoSettings | None = None) -> TheoryCheck:
    """Lasso at ``3 sigma sqrt(2 log(2p/alpha)/n)``, ridge at the smallest safe penalty.

    Counts replications where ``||X b0 - X beta_r|| <= ||X b0 - X beta_l||``;
    the theory guarantees a frequency of at least ``1 - alpha``.
    """
    lam = theoretical_lambda_l(sigma, n, p, alpha)
    b0 = true_beta("unit_first_s", p, s_true)
    improved = np.zeros(replications, dtype=bool)
    cond = np.zeros(replications, dtype=bool)
    all_hold = True
    for r in range(replications):
        rng = Rng(seed, r)
        X = ar1_design(rng, n, p, rho)
        eps = gaussian_vector(rng, n, sigma)
        y = X.values @ b0 + eps
        fit = fit_lasso(X, y, lam, settings)
        rf = refit_closed_form(X, fit, default_lambda_r(X, fit.active_set))
        el = X.values @ (fit.beta - b0)
        er = X.values @ (rf.beta_r - b0)
        improved[r] = np.linalg.norm(er) <= np.linalg.norm(el) + 1e-12
        cert = improvement_certificate(X, TrueModel(b0, sigma), eps, fit, rf)
        cond[r] = cert.condition_met
        all_hold &= cert.holds
    return TheoryCheck(float(improved.mean()), replications, lam, improved, cond, bool(all_hold))
