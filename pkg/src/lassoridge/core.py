"""Numeric foundations shared by the solver, refit and simulation code.

Designs are stored dense and column-normalized so that ``||X_j||_2^2 = n``.
Randomness flows through :class:`Rng`, a thin wrapper over numpy's
``SeedSequence`` that can be split into independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NORMALIZATION_RTOL = 1e-8
SYMMETRY_ATOL = 1e-10


class DesignError(ValueError):
    """Raised for malformed design matrices."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class SpectralNormError(RuntimeError):
    """Power iteration hit its iteration cap; carries the last iterate."""

    def __init__(self, message, estimate, vector):
        super().__init__(message)
        self.estimate = estimate
        self.vector = vector


def _check_finite(a, what="input"):
    if not np.all(np.isfinite(a)):
        raise DesignError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class DesignMatrix:
    """An ``n x p`` predictor matrix, optionally column-normalized.

    Attributes
    ----------
    values : ndarray of shape (n, p)
    normalized : bool
        When true, every column satisfies ``||X_j||^2 = n`` to a relative
        tolerance of 1e-8.
    """

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        X = np.asarray(self.values, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DesignError(f"design must be a non-empty 2-D array, got shape {X.shape}")
        _check_finite(X, "design")
        if self.normalized:
            n = X.shape[0]
            sq = np.einsum("ij,ij->j", X, X)
            bad = np.flatnonzero(np.abs(sq - n) > NORMALIZATION_RTOL * n)
            if bad.size:
                raise DesignError(
                    f"column {bad[0]} is not normalized (||X_j||^2 = {sq[bad[0]]!r}, n = {n})",
                    column=int(bad[0]),
                )
        X.setflags(write=False)
        object.__setattr__(self, "values", X)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class TrueModel:
    """Coefficients and noise level of ``y = X beta0 + eps``."""

    beta0: np.ndarray
    sigma: float

    def __post_init__(self):
        b = np.asarray(self.beta0, dtype=np.float64).ravel()
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        object.__setattr__(self, "beta0", b)

    def check_design(self, X: DesignMatrix):
        if self.beta0.shape[0] != X.p:
            raise ValueError(f"beta0 has length {self.beta0.shape[0]}, design has p = {X.p}")


@dataclass
class Rng:
    """Seeded, splittable random stream.

    Two instances with the same ``(seed, stream)`` produce identical draws;
    different ``stream`` ids give independent streams (numpy ``SeedSequence``
    spawn keys).
    """

    seed: int
    stream: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        self.generator = np.random.default_rng(ss)

    def child(self, stream: int) -> "Rng":
        """Independent stream derived from this seed; does not consume draws."""
        return Rng(self.seed, stream)

    def split(self, count: int) -> list["Rng"]:
        return [Rng(self.seed, k) for k in range(count)]


def normalize_columns(X) -> DesignMatrix:
    """Scale each column by ``sqrt(n) / ||X_j||_2`` so that ``||X_j||^2 = n``.

    Raises
    ------
    DesignError
        If an entry is non-finite or a column has zero norm (the ``column``
        attribute holds the 0-based index of the first offending column).
    """
    X, _ = normalize_with_scale(X)
    return X


def normalize_with_scale(X) -> tuple[DesignMatrix, np.ndarray]:
    """Like :func:`normalize_columns` but also return the per-column factors.

    The normalized design equals ``X * scale``, so coefficients fitted on the
    normalized design map back to the raw columns as ``beta * scale``.
    """
    if isinstance(X, DesignMatrix):
        X = X.values
    X = np.array(X, dtype=np.float64)
    if X.ndim != 2 or X.size == 0:
        raise DesignError(f"design must be a non-empty 2-D array, got shape {X.shape}")
    _check_finite(X, "design")
    n = X.shape[0]
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DesignError(f"column {zero[0]} has zero norm", column=int(zero[0]))
    scale = np.sqrt(n) / norms
    return DesignMatrix(X * scale, normalized=True), scale


def infinity_operator_norm(A) -> float:
    """Maximum absolute row sum."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.size == 0:
        return 0.0
    _check_finite(A, "matrix")
    return float(np.abs(A).sum(axis=1).max())


def spectral_norm(A, rtol=1e-10, max_iter=10000, seed=0) -> float:
    """Largest singular value of a symmetric matrix by power iteration.

    Iterates on ``A @ A`` so that eigenvalue pairs of equal magnitude and
    opposite sign do not make the iteration oscillate. The start vector is
    drawn from a fixed seed, so results are deterministic.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if A.size == 0:
        return 0.0
    _check_finite(A, "matrix")
    if not np.allclose(A, A.T, rtol=0.0, atol=SYMMETRY_ATOL):
        raise ValueError("matrix is not symmetric")
    if not np.any(A):
        return 0.0
    # work on A / max|a_ij| so that A @ A neither underflows nor overflows
    top = float(np.abs(A).max())
    A = A / top

    v = np.random.default_rng(seed).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A @ v
        new = np.linalg.norm(w)
        if new == 0.0:
            # start vector in the null space; perturb deterministically
            v = np.roll(v, 1) + 1.0 / np.sqrt(A.shape[0])
            v /= np.linalg.norm(v)
            continue
        v = A @ w
        v /= np.linalg.norm(v)
        if abs(new - est) <= rtol * new:
            return float(new * top)
        est = new
    raise SpectralNormError(
        f"power iteration did not reach rtol={rtol} in {max_iter} iterations",
        estimate=est * top,
        vector=v,
    )


def restricted_gram(X: DesignMatrix, E: Sequence[int]) -> np.ndarray:
    """``X_E^T X_E / n`` for the columns in ``E`` (0x0 when ``E`` is empty)."""
    idx = np.asarray(E, dtype=np.intp).ravel()
    if idx.size == 0:
        return np.zeros((0, 0))
    if idx.min() < 0 or idx.max() >= X.p:
        raise IndexError(f"index set out of range for p = {X.p}: {idx.tolist()}")
    XE = X.values[:, idx]
    G = XE.T @ XE / X.n
    return 0.5 * (G + G.T)


def gaussian_vector(rng: Rng, length: int, sd: float) -> np.ndarray:
    """I.i.d. ``N(0, sd^2)`` draws."""
    if sd < 0:
        raise ValueError("sd must be nonnegative")
    z = rng.generator.standard_normal(length)
    return sd * z
