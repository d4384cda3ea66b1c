"""Brusselator reaction-diffusion data generation, manifold-PCE surrogates,
and generalization benchmarks (distribution shift, input noise, dataset-size
and parameterization sweeps)."""

from .core import (
    CaseLabel,
    Dataset,
    Grid2D,
    ScalarField,
    Scheme,
    SolverParams,
    Trajectory,
    flatten,
    unflatten,
)
from .solver import kernel_backend, laplacian, reaction, simulate

__version__ = "0.1.0"

__all__ = [
    "CaseLabel",
    "Dataset",
    "Grid2D",
    "ScalarField",
    "Scheme",
    "SolverParams",
    "Trajectory",
    "flatten",
    "unflatten",
    "kernel_backend",
    "laplacian",
    "reaction",
    "simulate",
    "__version__",
]
