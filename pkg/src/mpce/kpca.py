"""Kernel PCA with out-of-sample projection and a learned inverse map.

The eigenproblem solved is N lambda alpha = K' alpha on the double-centered
Gram matrix K'. Coefficient vectors are scaled so each feature-space
component has unit norm, i.e. N * lambda_k * (alpha^k . alpha^k) = 1; under
this convention the latent coordinates of the training set are
sqrt(N lambda_k) * v_k and their total squared norm per component equals
N * lambda_k.

Because the feature map is implicit, reduction has no closed-form inverse.
The decoder here is kernel ridge regression from latent coordinates back to
ambient vectors (RBF kernel on the latent space by default): standard,
smooth, and exact for a full-rank linear kernel at zero ridge.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg as sla

__all__ = [
    "KernelSpec",
    "KPCAModel",
    "InverseMap",
    "gram",
    "cross_gram",
    "center",
    "fit",
    "transform",
    "fit_inverse",
    "inverse_transform",
]

_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus hyperparameters.

    gamma=None means "resolve from data": gamma_scale/(D*var(X)) for rbf,
    gamma_scale/D for poly. gamma_scale widens (<1) or narrows (>1) the
    kernel relative to that heuristic and is recorded with the model.
    """

    kind: str = "rbf"
    gamma: float | None = None
    degree: int = 3
    coef0: float = 1.0
    gamma_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "poly", "linear"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.gamma_scale <= 0:
            raise ValueError("gamma_scale must be positive")
        if self.kind == "poly" and self.degree < 1:
            raise ValueError("poly degree must be >= 1")

    def resolved(self, X: np.ndarray) -> "KernelSpec":
        if self.gamma is not None or self.kind == "linear":
            return self
        D = X.shape[1]
        if self.kind == "rbf":
            var = float(X.var())
            g = 1.0 / (D * var) if var > 0 else 1.0 / D
        else:
            g = 1.0 / D
        return replace(self, gamma=self.gamma_scale * g)


def cross_gram(A: np.ndarray, B: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """k(a_i, b_j) for all pairs; kernel gamma must already be resolved."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if kernel.kind == "linear":
        return A @ B.T
    if kernel.kind == "poly":
        return (kernel.gamma * (A @ B.T) + kernel.coef0) ** kernel.degree
    # rbf; clamp round-off negatives in the squared distances
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-kernel.gamma * sq)


def gram(X: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """Symmetric Gram matrix of the rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] < 2:
        raise ValueError("gram needs at least two points")
    K = cross_gram(X, X, kernel.resolved(X))
    return 0.5 * (K + K.T)


def center(K: np.ndarray) -> np.ndarray:
    """Double-center a symmetric Gram matrix (K' = H K H with
    H = I - 11^T/N); every row of the result sums to ~0."""
    K = np.asarray(K, dtype=np.float64)
    row = K.mean(axis=1, keepdims=True)
    total = K.mean()
    Kc = K - row - row.T + total
    return 0.5 * (Kc + Kc.T)


@dataclass(frozen=True)
class InverseMap:
    """Kernel ridge decoder from latent space back to ambient space.

    The regression is fitted on mean-removed ambient vectors (the mean is
    added back on decode), so kernels without an intrinsic constant term,
    e.g. linear, remain usable.
    """

    latents: np.ndarray        # (N, d) training latents, exactly the KPCA ones
    coeffs: np.ndarray         # (N, D) dual regression coefficients
    ambient_mean: np.ndarray   # (D,)
    kernel: KernelSpec
    ridge: float
    train_recon_rel_l2: float  # mean per-sample relative L2 on the training set


@dataclass(frozen=True)
class KPCAModel:
    training_points: np.ndarray   # (N, D)
    kernel: KernelSpec            # gamma resolved
    alphas: np.ndarray            # (N, d), column k scaled to unit feature norm
    lambdas: np.ndarray           # (d,) eigenvalues of K'/N, descending
    d: int
    k_row_means: np.ndarray       # (N,) row means of the uncentered training Gram
    k_total_mean: float
    latents: np.ndarray           # (N, d) training latent coordinates
    inverse: InverseMap | None = None

    @property
    def n_train(self) -> int:
        return self.training_points.shape[0]


def fit(X: np.ndarray, kernel: KernelSpec, d: int) -> KPCAModel:
    """Solve the centered-Gram eigenproblem and keep the top d components.

    d shrinks (with a warning) when it exceeds the numerical rank of the
    centered Gram matrix.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    N = X.shape[0]
    if not 1 <= d <= N:
        raise ValueError(f"need 1 <= d <= N={N}, got d={d}")
    kernel = kernel.resolved(X)
    K = cross_gram(X, X, kernel)
    K = 0.5 * (K + K.T)
    k_row_means = K.mean(axis=1)
    k_total_mean = float(K.mean())
    Kc = center(K)

    mu, vec = np.linalg.eigh(Kc)
    mu = mu[::-1].copy()
    vec = vec[:, ::-1].copy()
    mu[mu < 0] = 0.0

    rank_tol = max(mu[0], 1.0) * N * _RANK_RTOL
    usable = int((mu > rank_tol).sum())
    if d > usable:
        warnings.warn(
            f"requested d={d} exceeds numerical rank {usable}; shrinking",
            RuntimeWarning,
            stacklevel=2,
        )
        d = max(usable, 1)

    mu_d = mu[:d]
    alphas = vec[:, :d] / np.sqrt(np.maximum(mu_d, rank_tol))
    latents = vec[:, :d] * np.sqrt(mu_d)
    return KPCAModel(
        training_points=X,
        kernel=kernel,
        alphas=alphas,
        lambdas=mu_d / N,
        d=d,
        k_row_means=k_row_means,
        k_total_mean=k_total_mean,
        latents=latents,
    )


def transform(model: KPCAModel, x: np.ndarray) -> np.ndarray:
    """Project point(s) onto the latent components using the stored
    centering statistics; matches the training latents on training points."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.training_points.shape[1]:
        raise ValueError(
            f"point dimension {X.shape[1]} != training dimension {model.training_points.shape[1]}"
        )
    Kx = cross_gram(X, model.training_points, model.kernel)   # (n, N)
    Kx_c = Kx - Kx.mean(axis=1, keepdims=True) - model.k_row_means[None, :] + model.k_total_mean
    Z = Kx_c @ model.alphas
    return Z[0] if single else Z


def fit_inverse(
    model: KPCAModel,
    X: np.ndarray,
    ridge: float = 1e-3,
    latent_kernel: KernelSpec | None = None,
) -> KPCAModel:
    """Train the latent->ambient decoder on the model's own training set and
    return a model carrying it.

    X must be the matrix the KPCA was fitted on. Raises when the kernel
    system is numerically singular at ridge=0.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape != model.training_points.shape or not np.array_equal(X, model.training_points):
        raise ValueError("inverse map must be trained on exactly the KPCA training set")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    Z = model.latents
    lk = (latent_kernel or KernelSpec("rbf")).resolved(Z)
    Kz = cross_gram(Z, Z, lk)
    Kz = 0.5 * (Kz + Kz.T)
    A_sys = Kz + ridge * np.eye(Z.shape[0])
    mean = X.mean(axis=0)
    Xc = X - mean
    try:
        c, low = sla.cho_factor(A_sys, check_finite=False)
        coeffs = sla.cho_solve((c, low), Xc, check_finite=False)
    except sla.LinAlgError as e:
        if ridge == 0:
            raise np.linalg.LinAlgError(
                "latent kernel system is singular at ridge=0; use ridge > 0"
            ) from e
        raise
    recon = Kz @ coeffs + mean
    num = np.linalg.norm(recon - X, axis=1)
    den = np.linalg.norm(X, axis=1)
    rel = float(np.mean(num / np.where(den > 0, den, 1.0)))
    inv = InverseMap(latents=Z, coeffs=coeffs, ambient_mean=mean, kernel=lk,
                     ridge=ridge, train_recon_rel_l2=rel)
    return replace(model, inverse=inv)


def inverse_transform(model: KPCAModel, z: np.ndarray) -> np.ndarray:
    """Decode latent vector(s) to ambient space with the fitted inverse map."""
    if model.inverse is None:
        raise ValueError("model has no inverse map; call fit_inverse first")
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[1] != model.d:
        raise ValueError(f"latent dimension {Z.shape[1]} != model d={model.d}")
    Kz = cross_gram(Z, model.inverse.latents, model.inverse.kernel)
    Y = Kz @ model.inverse.coeffs + model.inverse.ambient_mean
    return Y[0] if single else Y
