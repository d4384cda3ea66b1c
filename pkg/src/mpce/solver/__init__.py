from .brusselator import (
    SolverDivergenceError,
    kernel_backend,
    laplacian,
    reaction,
    simulate,
)

__all__ = ["SolverDivergenceError", "kernel_backend", "laplacian", "reaction", "simulate"]
