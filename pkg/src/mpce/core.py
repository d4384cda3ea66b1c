"""Shared domain types: grids, scalar fields, trajectories and datasets.

All containers are frozen dataclasses holding read-only NumPy arrays, so
instances can be shared freely across threads. Field values are stored
row-major with y as the outer index (node (ix, iy) lives at iy*nx + ix);
this ordering is fixed project-wide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

__all__ = [
    "CaseLabel",
    "Scheme",
    "Grid2D",
    "ScalarField",
    "Trajectory",
    "Dataset",
    "SolverParams",
    "flatten",
    "unflatten",
]


class CaseLabel(str, Enum):
    CASE_I = "case1"
    CASE_II = "case2"
    OOD1 = "ood1"
    OOD2 = "ood2"
    CUSTOM = "custom"


class Scheme(str, Enum):
    EXPLICIT_SUBSTEP = "explicit_substep"
    IMEX = "imex"


def _readonly(a: np.ndarray) -> np.ndarray:
    # Share arrays that already own frozen storage; copy everything else so
    # containers can never alias a caller's mutable buffer.
    if (
        isinstance(a, np.ndarray)
        and a.dtype == np.float64
        and a.flags.c_contiguous
        and not a.flags.writeable
        and a.base is None
    ):
        return a
    out = np.array(a, dtype=np.float64, copy=True, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid2D:
    """Vertex-centered rectangular grid; boundary nodes are included,
    so the spacing is (x_max - x_min) / (nx - 1)."""

    nx: int = 28
    ny: int = 28
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid must have nx, ny >= 2, got {self.nx}x{self.ny}")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("grid extents must be increasing")

    @property
    def h_x(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def h_y(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as flat arrays of length nx*ny (y outer, x inner)."""
        x = np.linspace(self.x_min, self.x_max, self.nx)
        y = np.linspace(self.y_min, self.y_max, self.ny)
        X, Y = np.meshgrid(x, y)
        return X.ravel(), Y.ravel()


@dataclass(frozen=True)
class ScalarField:
    """One scalar value per grid node, flat row-major storage."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"field has {self.values.shape} values, grid expects ({self.grid.n_nodes},)"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("field values must be finite")

    def as_2d(self) -> np.ndarray:
        """(ny, nx) view of the values."""
        return self.values.reshape(self.grid.ny, self.grid.nx)

    @staticmethod
    def from_2d(grid: Grid2D, a: np.ndarray) -> "ScalarField":
        return ScalarField(grid, np.asarray(a, dtype=np.float64).ravel())

    def constant_like(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, np.full(self.grid.n_nodes, float(c)))


@dataclass(frozen=True)
class Trajectory:
    """An initial field paired with the solution snapshots it produced.

    `input` is the t=0 field; `snapshots` hold the evolved concentration at
    the (strictly increasing) `times` in (0, 1].
    """

    input: ScalarField
    snapshots: tuple[ScalarField, ...]
    times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        object.__setattr__(self, "times", _readonly(self.times))
        if len(self.snapshots) != self.times.shape[0]:
            raise ValueError("snapshot count must match times")
        if len(self.snapshots) == 0:
            raise ValueError("trajectory needs at least one snapshot")
        t = self.times
        if not (np.diff(t) > 0).all() or t[0] < 0.0 or t[-1] > 1.0 + 1e-12:
            raise ValueError("times must be strictly increasing within [0, 1]")
        g = self.input.grid
        for s in self.snapshots:
            if s.grid != g:
                raise ValueError("all snapshots must share the input grid")

    @property
    def nt(self) -> int:
        return len(self.snapshots)

    @property
    def d_out(self) -> int:
        return self.nt * self.input.grid.n_nodes


def flatten(traj: Trajectory) -> np.ndarray:
    """Concatenate the snapshots, in time order, into one vector of length
    nt * nx * ny. Round-trips exactly through :func:`unflatten`."""
    return np.concatenate([s.values for s in traj.snapshots])


def unflatten(
    values: np.ndarray,
    grid: Grid2D,
    times: np.ndarray,
    input_field: ScalarField,
) -> Trajectory:
    """Inverse of :func:`flatten` given the grid, snapshot times and input."""
    values = np.asarray(values, dtype=np.float64).ravel()
    nt = len(times)
    n = grid.n_nodes
    if values.shape[0] != nt * n:
        raise ValueError(f"expected {nt * n} values, got {values.shape[0]}")
    snaps = tuple(ScalarField(grid, values[k * n:(k + 1) * n]) for k in range(nt))
    return Trajectory(input=input_field, snapshots=snaps, times=np.asarray(times))


@dataclass(frozen=True)
class SolverParams:
    """Reaction-diffusion model constants and time discretization.

    `dt_output` is the solver's output interval, not the internal step: the
    explicit scheme substeps each output interval to stay inside the
    diffusive stability limit, the IMEX scheme treats diffusion implicitly.
    `nt` snapshots are kept, equally spaced over (0, t_end].
    """

    a: float = 1.0
    b: float = 1.7
    D0: float = 1.0
    D1: float = 0.5
    dt_output: float = 1e-2
    t_end: float = 1.0
    nt: int = 20
    scheme: Scheme = Scheme.EXPLICIT_SUBSTEP
    bc: str = "neumann"  # or "periodic"
    substep_safety: float = 0.8

    def __post_init__(self):
        if min(self.a, self.b, self.D0, self.D1) <= 0:
            raise ValueError("a, b, D0, D1 must be positive")
        if self.dt_output <= 0 or self.t_end <= 0 or self.nt < 1:
            raise ValueError("invalid time discretization")
        if not 0 < self.substep_safety <= 1:
            raise ValueError("substep_safety must be in (0, 1]")
        if self.bc not in ("neumann", "periodic"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        n_out = self.n_output_steps
        if abs(n_out * self.dt_output - self.t_end) > 1e-9 * self.t_end:
            raise ValueError("t_end must be an integer multiple of dt_output")
        if n_out % self.nt != 0:
            raise ValueError(
                f"nt={self.nt} must divide the {n_out} output steps evenly"
            )

    @property
    def n_output_steps(self) -> int:
        return int(round(self.t_end / self.dt_output))

    @property
    def snapshot_times(self) -> np.ndarray:
        return np.arange(1, self.nt + 1) * (self.t_end / self.nt)


@dataclass(frozen=True)
class Dataset:
    """A collection of trajectories sharing one grid and one snapshot count.

    `generation_config` carries provenance (solver params, random-field
    config, seeds) as a JSON-able mapping; it is written verbatim into the
    on-disk manifest.

    The sample unit is one trajectory: `n_fields` counts input fields, while
    `n_points` additionally counts each snapshot as an observation
    (n_fields * nt). Both conventions are recorded so reports can quote
    either.
    """

    case_label: CaseLabel
    trajectories: tuple[Trajectory, ...]
    generation_config: Any = None

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if not self.trajectories:
            raise ValueError("dataset must contain at least one trajectory")
        g = self.grid
        nt = self.trajectories[0].nt
        for tr in self.trajectories:
            if tr.input.grid != g or tr.nt != nt:
                raise ValueError("trajectories must share one grid and one nt")

    @property
    def grid(self) -> Grid2D:
        return self.trajectories[0].input.grid

    @property
    def nt(self) -> int:
        return self.trajectories[0].nt

    @property
    def times(self) -> np.ndarray:
        return self.trajectories[0].times

    @property
    def n_fields(self) -> int:
        return len(self.trajectories)

    @property
    def n_points(self) -> int:
        return self.n_fields * self.nt

    def inputs_matrix(self) -> np.ndarray:
        """(N, nx*ny) matrix of the input fields."""
        return np.stack([tr.input.values for tr in self.trajectories])

    def outputs_matrix(self) -> np.ndarray:
        """(N, nt*nx*ny) matrix of flattened trajectories."""
        return np.stack([flatten(tr) for tr in self.trajectories])

    def subset(self, idx: Sequence[int]) -> "Dataset":
        return Dataset(
            case_label=self.case_label,
            trajectories=tuple(self.trajectories[i] for i in idx),
            generation_config=self.generation_config,
        )
