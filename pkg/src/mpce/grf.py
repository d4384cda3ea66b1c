"""Gaussian random fields for initial conditions via truncated
Karhunen-Loeve expansion of a squared-exponential covariance.

The covariance is assembled on the grid nodes and eigendecomposed directly
(784 nodes is small enough that Nystrom tricks are unnecessary). Fields are
synthesized as sum_i sqrt(lambda_i) * xi_i * phi_i with standard-normal xi.

Reproducibility: all randomness flows through NumPy's PCG64 via
``default_rng``. A sample batch derives one child seed per sample from
``SeedSequence(seed).spawn``, so sample i is identical no matter how many
samples are drawn around it or how batches are partitioned across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Grid2D, ScalarField

__all__ = ["KLEConfig", "KLEModel", "build_covariance", "decompose", "sample"]


@dataclass(frozen=True)
class KLEConfig:
    """Squared-exponential kernel parameters and truncation policy."""

    l_x: float
    l_y: float
    sigma2: float
    energy_fraction: float = 0.99
    max_modes: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.l_x <= 0 or self.l_y <= 0:
            raise ValueError("correlation lengths must be positive")
        if self.sigma2 < 0:
            raise ValueError("variance must be nonnegative")
        if not 0 < self.energy_fraction <= 1:
            raise ValueError("energy_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class KLEModel:
    """Eigenpairs of the node covariance, descending, with truncation M.

    The full spectrum is retained (the grid is small); only the first M
    modes participate in sampling.
    """

    grid: Grid2D
    eigenvalues: np.ndarray   # (n,), descending, clamped >= 0
    modes: np.ndarray         # (n, n), column k is mode k
    M: int

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=np.float64))
        object.__setattr__(self, "modes", np.asarray(self.modes, dtype=np.float64))
        if not 0 < self.M <= self.eigenvalues.shape[0]:
            raise ValueError("truncation M out of range")

    def truncated_covariance(self) -> np.ndarray:
        V = self.modes[:, : self.M]
        return (V * self.eigenvalues[: self.M]) @ V.T


def build_covariance(grid: Grid2D, cfg: KLEConfig) -> np.ndarray:
    """Node-by-node covariance
    sigma^2 * exp(-(x-x')^2 / (2 l_x^2) - (y-y')^2 / (2 l_y^2))."""
    x, y = grid.xy()
    dx2 = (x[:, None] - x[None, :]) ** 2
    dy2 = (y[:, None] - y[None, :]) ** 2
    cov = cfg.sigma2 * np.exp(-dx2 / (2 * cfg.l_x**2) - dy2 / (2 * cfg.l_y**2))
    return 0.5 * (cov + cov.T)


def decompose(cov: np.ndarray, cfg: KLEConfig, grid: Grid2D | None = None) -> KLEModel:
    """Symmetric eigendecomposition, descending sort, truncation at the
    smallest M whose eigenvalues capture ``energy_fraction`` of the total
    (capped by ``max_modes``). Negative round-off eigenvalues are clamped
    to zero rather than regularized with a nugget."""
    cov = np.asarray(cov, dtype=np.float64)
    n = cov.shape[0]
    if cov.shape != (n, n):
        raise ValueError("covariance must be square")
    if grid is None:
        # infer a square grid when possible; callers normally pass one
        side = int(round(np.sqrt(n)))
        if side * side != n:
            raise ValueError("pass grid explicitly for non-square node counts")
        grid = Grid2D(nx=side, ny=side)

    lam, vec = np.linalg.eigh(0.5 * (cov + cov.T))
    lam = lam[::-1].copy()
    vec = vec[:, ::-1].copy()
    lam[lam < 0] = 0.0

    total = lam.sum()
    if total <= 0:
        M = 1
    else:
        cum = np.cumsum(lam)
        M = int(np.searchsorted(cum, cfg.energy_fraction * total - 1e-15 * total) + 1)
        M = min(M, n)
    if cfg.max_modes is not None:
        M = min(M, int(cfg.max_modes))
    return KLEModel(grid=grid, eigenvalues=lam, modes=vec, M=M)


def build_model(grid: Grid2D, cfg: KLEConfig) -> KLEModel:
    """Covariance assembly + decomposition in one call."""
    return decompose(build_covariance(grid, cfg), cfg, grid)


def sample(model: KLEModel, n: int, rng_seed: int) -> list[ScalarField]:
    """Draw n independent zero-mean fields with the model's truncated
    covariance; deterministic per (seed, sample index)."""
    M = model.M
    scale = np.sqrt(model.eigenvalues[:M])
    basis = model.modes[:, :M] * scale          # (n_nodes, M)
    children = np.random.SeedSequence(rng_seed).spawn(n)
    xi = np.stack([np.random.default_rng(c).standard_normal(M) for c in children])
    fields = xi @ basis.T
    return [ScalarField(model.grid, fields[i]) for i in range(n)]
