"""Total-degree polynomial chaos expansions fitted by penalized least squares.

The basis is a product of orthonormal univariate polynomials: probabilists'
Hermite He_s / sqrt(s!) for a standard-normal germ (the default; latent
inputs are z-scored first), or shifted Legendre * sqrt(2s+1) on [-1, 1]
(inputs min-max mapped). Coefficients minimize

    (1/N) sum_i ||y_i - Phi(z_i) c||^2 + penalty * ||c||^2

via regularized normal equations with a Cholesky factorization shared by all
output dimensions; when the condition estimate is poor the solver falls back
to an orthogonal decomposition of the augmented system.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

__all__ = [
    "MultiIndexSet",
    "PCEModel",
    "BasisSizeError",
    "RankDeficiencyError",
    "total_degree_set",
    "eval_basis",
    "fit",
    "predict",
    "count_params",
]

FAMILIES = ("hermite_probabilists", "legendre")

_COND_LIMIT = 1e8
_DEFAULT_MAX_TERMS = 2_000_000


class BasisSizeError(ValueError):
    """The requested multi-index set is too large to materialize."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """Design matrix is column-rank deficient at zero penalty."""


def count_params(s_max: int, d_in: int, d_out: int) -> int:
    """Trainable coefficient count: C(s_max + d_in, d_in) * d_out, computed
    exactly (no factorial overflow)."""
    if s_max < 0 or d_in < 0 or d_out < 0:
        raise ValueError("arguments must be nonnegative")
    return math.comb(s_max + d_in, d_in) * d_out


@dataclass(frozen=True)
class MultiIndexSet:
    k: int
    s_max: int
    indices: np.ndarray   # (S, k) nonnegative ints, graded-lexicographic

    @property
    def size(self) -> int:
        return self.indices.shape[0]


def total_degree_set(k: int, s_max: int, max_terms: int = _DEFAULT_MAX_TERMS) -> MultiIndexSet:
    """All multi-indices with |s|_1 <= s_max, ordered by total degree and
    lexicographically (first dimension highest) within each degree."""
    if k < 1 or s_max < 0:
        raise ValueError("need k >= 1 and s_max >= 0")
    S = math.comb(s_max + k, k)
    if S > max_terms:
        raise BasisSizeError(f"basis would hold {S} terms (limit {max_terms})")

    out = np.zeros((S, k), dtype=np.int64)
    row = 0

    def compositions(deg, dims, prefix):
        nonlocal row
        if dims == 1:
            out[row, : len(prefix)] = prefix
            out[row, -1] = deg
            row += 1
            return
        for head in range(deg, -1, -1):
            compositions(deg - head, dims - 1, prefix + [head])

    for deg in range(s_max + 1):
        compositions(deg, k, [])
    assert row == S
    return MultiIndexSet(k=k, s_max=s_max, indices=out)


def _hermite_table(z: np.ndarray, deg: int) -> np.ndarray:
    """(deg+1, n) orthonormal probabilists' Hermite values He_s(z)/sqrt(s!)."""
    n = z.shape[0]
    H = np.empty((deg + 1, n))
    H[0] = 1.0
    if deg >= 1:
        H[1] = z
    for s in range(1, deg):
        H[s + 1] = z * H[s] - s * H[s - 1]
    norms = np.sqrt([math.factorial(s) for s in range(deg + 1)])
    return H / norms[:, None]


def _legendre_table(z: np.ndarray, deg: int) -> np.ndarray:
    """(deg+1, n) Legendre values P_s(z)*sqrt(2s+1), orthonormal for z
    uniform on [-1, 1]."""
    n = z.shape[0]
    P = np.empty((deg + 1, n))
    P[0] = 1.0
    if deg >= 1:
        P[1] = z
    for s in range(1, deg):
        P[s + 1] = ((2 * s + 1) * z * P[s] - s * P[s - 1]) / (s + 1)
    norms = np.sqrt(2 * np.arange(deg + 1) + 1.0)
    return P * norms[:, None]


def eval_basis(index_set: MultiIndexSet, family: str, z: np.ndarray) -> np.ndarray:
    """Evaluate all S basis polynomials at standardized point(s) z.

    z: (k,) or (n, k), already standardized for the family (z-scores for
    Hermite, [-1, 1] for Legendre). Returns (S,) or (n, S).
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[1] != index_set.k:
        raise ValueError(f"point dimension {Z.shape[1]} != k={index_set.k}")
    table_fn = _hermite_table if family == "hermite_probabilists" else _legendre_table
    tables = [table_fn(Z[:, i], index_set.s_max) for i in range(index_set.k)]
    Phi = np.ones((Z.shape[0], index_set.size))
    for j, s in enumerate(index_set.indices):
        for i, si in enumerate(s):
            if si:
                Phi[:, j] *= tables[i][si]
    return Phi[0] if single else Phi


@dataclass(frozen=True)
class PCEModel:
    index_set: MultiIndexSet
    family: str
    coeffs: np.ndarray        # (S, d_out)
    loc: np.ndarray           # (k,) standardization offset
    scale: np.ndarray         # (k,) standardization scale, > 0
    penalty: float

    @property
    def k(self) -> int:
        return self.index_set.k

    @property
    def d_out(self) -> int:
        return self.coeffs.shape[1]

    @property
    def n_params(self) -> int:
        return self.coeffs.size

    def standardize(self, Z: np.ndarray) -> np.ndarray:
        return (Z - self.loc) / self.scale


def _standardization(Z: np.ndarray, family: str) -> tuple[np.ndarray, np.ndarray]:
    if family == "hermite_probabilists":
        loc = Z.mean(axis=0)
        scale = Z.std(axis=0)
    else:
        lo = Z.min(axis=0)
        hi = Z.max(axis=0)
        loc = 0.5 * (lo + hi)
        scale = 0.5 * (hi - lo)
    bad = scale <= 1e-12 * np.maximum(np.abs(loc), 1.0)
    if bad.any():
        warnings.warn(
            f"{int(bad.sum())} input dimension(s) have zero variance; scale set to 1",
            RuntimeWarning,
            stacklevel=3,
        )
        scale = np.where(bad, 1.0, scale)
    return loc, scale


def fit(
    Z: np.ndarray,
    Y: np.ndarray,
    s_max: int,
    family: str = "hermite_probabilists",
    penalty: float = 0.0,
) -> PCEModel:
    """Fit coefficients for every output column of Y against inputs Z.

    penalty=0 is ordinary least squares. In the interpolation regime
    (S > N at penalty 0) the minimum-norm solution is returned; an
    overdetermined but column-rank-deficient design at penalty 0 raises
    ``RankDeficiencyError`` instead (increase the penalty).
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if not (np.isfinite(Z).all() and np.isfinite(Y).all()):
        raise ValueError("non-finite training data")
    if Z.shape[0] != Y.shape[0]:
        raise ValueError("Z and Y sample counts differ")
    if penalty < 0:
        raise ValueError("penalty must be >= 0")

    N, k = Z.shape
    index_set = total_degree_set(k, s_max)
    loc, scale = _standardization(Z, family)
    Phi = eval_basis(index_set, family, (Z - loc) / scale)
    S = index_set.size

    coeffs = None
    if penalty == 0.0 and S > N:
        coeffs, *_ = np.linalg.lstsq(Phi, Y, rcond=None)
    else:
        G = (Phi.T @ Phi) / N + penalty * np.eye(S)
        b = (Phi.T @ Y) / N
        try:
            c, low = sla.cho_factor(G, check_finite=False)
            anorm = np.abs(G).sum(axis=0).max()
            rcond, info = sla.lapack.dpocon(c, anorm, uplo=b"L" if low else b"U")
            if info == 0 and rcond > 1.0 / _COND_LIMIT:
                coeffs = sla.cho_solve((c, low), b, check_finite=False)
        except sla.LinAlgError:
            pass
        if coeffs is None:
            # ill-conditioned normal equations: orthogonal decomposition of
            # the (optionally ridge-augmented) design
            A = Phi / np.sqrt(N)
            B = Y / np.sqrt(N)
            if penalty > 0:
                A = np.vstack([A, np.sqrt(penalty) * np.eye(S)])
                B = np.vstack([B, np.zeros((S, Y.shape[1]))])
            coeffs, _, rank, _ = np.linalg.lstsq(A, B, rcond=None)
            if penalty == 0.0 and rank < S:
                raise RankDeficiencyError(
                    f"design rank {rank} < basis size {S} at penalty 0; use a ridge penalty"
                )
    return PCEModel(
        index_set=index_set,
        family=family,
        coeffs=np.asarray(coeffs),
        loc=loc,
        scale=scale,
        penalty=penalty,
    )


def predict(model: PCEModel, z_raw: np.ndarray) -> np.ndarray:
    """Evaluate the expansion at raw (unstandardized) latent point(s)."""
    z_raw = np.asarray(z_raw, dtype=np.float64)
    single = z_raw.ndim == 1
    Z = np.atleast_2d(z_raw)
    if Z.shape[1] != model.k:
        raise ValueError(f"point dimension {Z.shape[1]} != k={model.k}")
    Phi = eval_basis(model.index_set, model.family, model.standardize(Z))
    Y = Phi @ model.coeffs
    return Y[0] if single else Y
