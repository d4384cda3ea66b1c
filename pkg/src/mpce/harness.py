"""Metrics, noise and out-of-distribution protocols, and experiment runners.

Error metric: per-sample relative L2, 100 * ||pred - truth|| / ||truth|| on
flattened trajectories, averaged over the evaluation set (mean of ratios).
Reported numbers are mean +/- std over independently seeded training trials.

Randomness is organized around one master seed. Stream s of purpose `tag`
uses ``SeedSequence([master, _STREAM[tag], s])``, so datasets, trial
subsamples and noise draws are all reproducible and independent. A trial's
training set is a seeded subsample (without replacement) of a generated pool
that is slightly larger than the training size; dataset-size sweeps take
prefixes of the same per-trial permutation, which makes the smaller training
sets nested inside the larger ones.

Noise protocol: added input noise is i.i.d. Gaussian per node with standard
deviation rho * sigma_ref, where sigma_ref is the standard deviation of all
input-field values of the dataset being perturbed (logged in reports). Noise
is applied to test inputs by default; a flag switches it to training inputs.
"""

from __future__ import annotations

import hashlib
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import grf, pipeline, presets
from .containers import read_dataset, write_dataset
from .core import CaseLabel, Dataset, Grid2D, ScalarField, Scheme, SolverParams, Trajectory, flatten
from .solver import kernel_backend, simulate

__all__ = [
    "ExperimentConfig",
    "EvalReport",
    "relative_l2",
    "relative_l2_matrix",
    "add_input_noise",
    "generate_dataset",
    "ensure_case_data",
    "run_comparison",
    "sweep_parameters",
    "sweep_dataset_size",
]

_STREAM = {"dataset": 0, "trial": 1, "noise": 2}


def _seed_seq(master: int, tag: str, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), _STREAM[tag], int(index)])


# --- metrics -------------------------------------------------------------------


def relative_l2_matrix(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-sample relative L2 error in percent for (N, D) matrices."""
    pred = np.atleast_2d(pred)
    truth = np.atleast_2d(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    den = np.linalg.norm(truth, axis=1)
    if (den == 0).any():
        raise ValueError("truth sample with zero norm")
    return 100.0 * np.linalg.norm(pred - truth, axis=1) / den


def relative_l2(pred: Trajectory | np.ndarray, truth: Trajectory | np.ndarray) -> float:
    """Relative L2 error in percent. Trajectory arguments are flattened;
    matrix arguments are averaged over samples."""
    if isinstance(pred, Trajectory):
        pred = flatten(pred)
    if isinstance(truth, Trajectory):
        truth = flatten(truth)
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.ndim == 1:
        return float(relative_l2_matrix(pred[None, :], truth[None, :])[0])
    return float(relative_l2_matrix(pred, truth).mean())


def add_input_noise(
    X: np.ndarray,
    rho: float,
    seed: int | np.random.SeedSequence,
    sigma_ref: float | None = None,
) -> np.ndarray:
    """Add i.i.d. Gaussian noise with std rho * sigma_ref per node.

    sigma_ref defaults to the standard deviation of all values of X (the
    per-dataset reference scale).
    """
    if rho < 0:
        raise ValueError("noise ratio must be >= 0")
    X = np.asarray(X, dtype=np.float64)
    if rho == 0:
        return X.copy()
    if sigma_ref is None:
        sigma_ref = float(X.std())
    rng = np.random.default_rng(seed)
    return X + rng.standard_normal(X.shape) * (rho * sigma_ref)


# --- dataset generation ----------------------------------------------------------


def _simulate_one(args):
    values, grid_meta, params, clip = args
    grid = Grid2D(**grid_meta)
    vals = np.maximum(values, 0.0) if clip else values
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        traj = simulate(ScalarField(grid, vals), params)
    return flatten(traj)


def generate_dataset(
    case: str,
    split: str,
    n_fields: int,
    seed: int,
    grid: Grid2D | None = None,
    scheme: Scheme = Scheme.EXPLICIT_SUBSTEP,
    clip_negative: bool = False,
    workers: int = 1,
    kle_energy_fraction: float = 0.99,
) -> Dataset:
    """Sample n_fields initial fields from the split's random-field
    parameters and integrate each one."""
    grid = grid or Grid2D()
    params = presets.solver_params(case, scheme)
    kle_cfg = presets.kle_config(case, split, seed=seed)
    kle_cfg = grf.KLEConfig(
        l_x=kle_cfg.l_x, l_y=kle_cfg.l_y, sigma2=kle_cfg.sigma2,
        energy_fraction=kle_energy_fraction, seed=seed,
    )
    model = grf.build_model(grid, kle_cfg)
    fields = grf.sample(model, n_fields, rng_seed=seed)

    grid_meta = {"nx": grid.nx, "ny": grid.ny,
                 "x_min": grid.x_min, "x_max": grid.x_max,
                 "y_min": grid.y_min, "y_max": grid.y_max}
    jobs = [(f.values, grid_meta, params, clip_negative) for f in fields]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flats = list(pool.map(_simulate_one, jobs, chunksize=8))
    else:
        flats = [_simulate_one(j) for j in jobs]

    times = params.snapshot_times
    n = grid.n_nodes
    trajs = []
    for f, flat in zip(fields, flats):
        vals = np.maximum(f.values, 0.0) if clip_negative else f.values
        snaps = tuple(ScalarField(grid, flat[k * n:(k + 1) * n]) for k in range(params.nt))
        trajs.append(Trajectory(input=ScalarField(grid, vals), snapshots=snaps, times=times))

    gen_cfg = {
        "case": case,
        "split": split,
        "seed": int(seed),
        "solver": {
            "a": params.a, "b": params.b, "D0": params.D0, "D1": params.D1,
            "dt_output": params.dt_output, "t_end": params.t_end,
            "nt": params.nt, "scheme": params.scheme.value, "bc": params.bc,
            "substep_safety": params.substep_safety,
        },
        "kle": {
            "l_x": kle_cfg.l_x, "l_y": kle_cfg.l_y, "sigma2": kle_cfg.sigma2,
            "energy_fraction": kle_cfg.energy_fraction,
            "modes_used": model.M,
        },
        "clip_negative": bool(clip_negative),
        "kernel_backend": kernel_backend(),
    }
    return Dataset(
        case_label=presets.split_label(case, split),
        trajectories=tuple(trajs),
        generation_config=gen_cfg,
    )


# --- experiment configuration -----------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    case: str = "case1"
    data_dir: str = "data"
    out_dir: str = "reports"
    n_train_fields: int = 800
    n_test_fields: int = 200
    pool_extra: int = 200
    trials: int = 5
    noise_levels: tuple[float, ...] = (0.1,)
    noise_target: str = "test"          # or "train"
    presets: tuple[str, ...] = ("u-mpce", "o-mpce")
    # parameter sweep axes: (d_in, d_out, s_max) triples; spans heavily
    # truncated through the presets to an interpolation-regime giant
    param_grid: tuple[tuple[int, int, int], ...] = (
        (4, 4, 1),
        (8, 10, 2),
        (18, 20, 2),
        (30, 45, 2),
        (30, 45, 3),
    )
    sizes: tuple[int, ...] = (100, 200, 400, 800)
    master_seed: int = 2024
    # benchmark data protocol: implicit diffusion stepping and nonnegative
    # initial fields (both recorded in dataset manifests)
    scheme: str = "imex"
    workers: int = 1
    clip_negative: bool = True
    generate_if_missing: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(r < 0 for r in self.noise_levels):
            raise ValueError("noise ratios must be >= 0")
        if self.noise_target not in ("test", "train"):
            raise ValueError("noise_target must be 'test' or 'train'")

    @property
    def pool_fields(self) -> int:
        return self.n_train_fields + self.pool_extra

    @staticmethod
    def from_json(path: Path | str) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        for key in ("noise_levels", "presets", "sizes"):
            if key in raw:
                raw[key] = tuple(raw[key])
        if "param_grid" in raw:
            raw["param_grid"] = tuple(tuple(g) for g in raw["param_grid"])
        return ExperimentConfig(**raw)

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class EvalReport:
    """Rows of aggregate metrics plus provenance metadata."""

    rows: list[dict[str, Any]]
    meta: dict[str, Any] = field(default_factory=dict)

    def to_jsonl(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(json.dumps({"meta": self.meta}) + "\n")
            for row in self.rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")

    def to_csv(self, path: Path | str, columns: Sequence[str]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(",".join(columns) + "\n")
            for row in self.rows:
                fh.write(",".join(str(row.get(c, "")) for c in columns) + "\n")

    def table(self, columns: Sequence[str] | None = None) -> str:
        if not self.rows:
            return "(empty report)"
        columns = list(columns or self.rows[0].keys())
        cells = [[_fmt_cell(row.get(c, "")) for c in columns] for row in self.rows]
        widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
        lines.append("  ".join("-" * w for w in widths))
        for r in cells:
            lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
        return "\n".join(lines)


def _fmt_cell(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


# --- dataset management -------------------------------------------------------------


_SPLIT_SEED_INDEX = {"train": 0, "test": 1, "ood1": 2, "ood2": 3}


def ensure_case_data(cfg: ExperimentConfig) -> dict[str, tuple[Dataset, str]]:
    """Load (or generate and persist) the four split containers for a case.

    The train split holds the full sampling pool (n_train_fields +
    pool_extra trajectories); trials subsample it.
    """
    base = Path(cfg.data_dir) / cfg.case
    sizes = {
        "train": cfg.pool_fields,
        "test": cfg.n_test_fields,
        "ood1": cfg.n_test_fields,
        "ood2": cfg.n_test_fields,
    }
    out = {}
    for split, n in sizes.items():
        d = base / split
        if (d / "manifest.json").exists():
            ds, chash = read_dataset(d)
            if ds.n_fields < n:
                raise ValueError(
                    f"{d} holds {ds.n_fields} fields but the experiment needs {n}; "
                    "regenerate with a larger size"
                )
        elif cfg.generate_if_missing:
            seed = int(_seed_seq(cfg.master_seed, "dataset", _SPLIT_SEED_INDEX[split])
                       .generate_state(1)[0])
            ds = generate_dataset(
                cfg.case, split, n, seed=seed,
                scheme=Scheme(cfg.scheme), clip_negative=cfg.clip_negative,
                workers=cfg.workers,
            )
            chash = write_dataset(ds, d)
        else:
            raise FileNotFoundError(f"dataset container missing: {d}")
        out[split] = (ds, chash)
    return out


def _trial_indices(cfg: ExperimentConfig, trial: int, pool_n: int, size: int) -> np.ndarray:
    rng = np.random.default_rng(_seed_seq(cfg.master_seed, "trial", trial))
    perm = rng.permutation(pool_n)
    return perm[:size]


# --- runners ----------------------------------------------------------------------


def _aggregate(rows: Iterable[float]) -> tuple[float, float]:
    vals = np.asarray(list(rows), dtype=np.float64)
    return float(vals.mean()), float(vals.std())


def _eval_sets_for(
    cfg: ExperimentConfig,
    data: dict[str, tuple[Dataset, str]],
) -> dict[str, tuple[np.ndarray, np.ndarray, str]]:
    """(inputs, truth outputs, dataset hash) per evaluation set name."""
    sets = {}
    for split in ("test", "ood1", "ood2"):
        ds, chash = data[split]
        sets[split] = (ds.inputs_matrix(), ds.outputs_matrix(), chash)
    if cfg.noise_target == "test":
        X, Y, chash = sets["test"]
        for rho in cfg.noise_levels:
            if rho == 0:
                continue
            Xn = add_input_noise(X, rho, _seed_seq(cfg.master_seed, "noise", int(rho * 1000)))
            sets[f"test+{int(round(rho * 100))}%noise"] = (Xn, Y, chash)
    return sets


def _fit_trial(
    cfg: ExperimentConfig,
    mcfg: pipeline.MPCEConfig,
    pool: Dataset,
    pool_hash: str,
    trial: int,
    size: int | None = None,
):
    size = size or cfg.n_train_fields
    idx = _trial_indices(cfg, trial, pool.n_fields, size)
    train = pool.subset(idx)
    if cfg.noise_target == "train":
        # train-side noise protocol: perturb the training inputs only
        X = train.inputs_matrix()
        rho = max(cfg.noise_levels) if cfg.noise_levels else 0.0
        Xn = add_input_noise(X, rho, _seed_seq(cfg.master_seed, "noise", trial))
        trajs = []
        for i, tr in enumerate(train.trajectories):
            trajs.append(Trajectory(
                input=ScalarField(tr.input.grid, Xn[i]),
                snapshots=tr.snapshots, times=tr.times,
            ))
        train = Dataset(train.case_label, tuple(trajs), train.generation_config)
    return pipeline.fit(train, mcfg, dataset_hash=pool_hash)


def run_comparison(cfg: ExperimentConfig) -> EvalReport:
    """Preset-by-preset evaluation on test / ood1 / ood2 / noisy test sets,
    aggregated over independently seeded trials."""
    data = ensure_case_data(cfg)
    pool, pool_hash = data["train"]
    eval_sets = _eval_sets_for(cfg, data)

    rows = []
    failures = []
    for preset_name in cfg.presets:
        mcfg = presets.surrogate_preset(cfg.case, preset_name)
        per_set: dict[str, list[float]] = {name: [] for name in eval_sets}
        fit_times = []
        n_params = None
        for trial in range(cfg.trials):
            try:
                t0 = time.perf_counter()
                surrogate = _fit_trial(cfg, mcfg, pool, pool_hash, trial)
                fit_times.append(time.perf_counter() - t0)
                n_params = surrogate.n_params
                for name, (X, Y, _) in eval_sets.items():
                    pred = pipeline.predict_matrix(surrogate, X)
                    per_set[name].append(relative_l2(pred, Y))
            except Exception as e:  # noqa: BLE001 - record and continue
                failures.append({"preset": preset_name, "trial": trial, "error": str(e)})
        for name, vals in per_set.items():
            if not vals:
                continue
            mean, std = _aggregate(vals)
            rows.append({
                "model": preset_name, "case": cfg.case, "eval_set": name,
                "rel_l2_mean_pct": mean, "rel_l2_std_pct": std,
                "n_params": n_params, "n_train_fields": cfg.n_train_fields,
                "trials": len(vals),
                "fit_seconds_mean": float(np.mean(fit_times)) if fit_times else None,
                "dataset_hash": eval_sets[name][2],
            })
    meta = _report_meta(cfg, data, failures)
    return EvalReport(rows=rows, meta=meta)


def sweep_parameters(cfg: ExperimentConfig) -> EvalReport:
    """Error versus trainable-parameter count over the declared
    (d_in, d_out, s_max) grid, on test and ood1 data."""
    data = ensure_case_data(cfg)
    pool, pool_hash = data["train"]
    test_X, test_Y, _ = (data["test"][0].inputs_matrix(),
                         data["test"][0].outputs_matrix(), data["test"][1])
    ood_X, ood_Y = data["ood1"][0].inputs_matrix(), data["ood1"][0].outputs_matrix()

    rows = []
    failures = []
    base = presets.surrogate_preset(cfg.case, "o-mpce")
    for d_in, d_out, s_max in cfg.param_grid:
        mcfg = replace(base, d_in=d_in, d_out=d_out, s_max=s_max)
        test_errs, ood_errs = [], []
        n_params = None
        for trial in range(cfg.trials):
            try:
                surrogate = _fit_trial(cfg, mcfg, pool, pool_hash, trial)
                n_params = surrogate.n_params
                test_errs.append(relative_l2(pipeline.predict_matrix(surrogate, test_X), test_Y))
                ood_errs.append(relative_l2(pipeline.predict_matrix(surrogate, ood_X), ood_Y))
            except Exception as e:  # noqa: BLE001
                failures.append({"config": [d_in, d_out, s_max], "trial": trial, "error": str(e)})
        if not test_errs:
            continue
        tm, ts = _aggregate(test_errs)
        om, os_ = _aggregate(ood_errs)
        rows.append({
            "d_in": d_in, "d_out": d_out, "s_max": s_max, "n_params": n_params,
            "rel_l2_mean_pct": tm, "rel_l2_std_pct": ts,
            "ood1_rel_l2_mean_pct": om, "ood1_rel_l2_std_pct": os_,
            "n_train_fields": cfg.n_train_fields, "trials": len(test_errs),
            "over_parameterized": bool(n_params and n_params > cfg.n_train_fields * pool.nt),
        })
    rows.sort(key=lambda r: r["n_params"])
    meta = _report_meta(cfg, data, failures)
    meta["n_train_points"] = cfg.n_train_fields * pool.nt
    return EvalReport(rows=rows, meta=meta)


def sweep_dataset_size(cfg: ExperimentConfig) -> EvalReport:
    """Test error versus training-set size with nested per-trial subsets."""
    data = ensure_case_data(cfg)
    pool, pool_hash = data["train"]
    test_X, test_Y, test_hash = (data["test"][0].inputs_matrix(),
                                 data["test"][0].outputs_matrix(), data["test"][1])
    if max(cfg.sizes) > pool.n_fields:
        raise ValueError(f"largest sweep size {max(cfg.sizes)} exceeds pool {pool.n_fields}")

    rows = []
    failures = []
    for preset_name in cfg.presets:
        mcfg = presets.surrogate_preset(cfg.case, preset_name)
        for size in cfg.sizes:
            errs = []
            for trial in range(cfg.trials):
                try:
                    surrogate = _fit_trial(cfg, mcfg, pool, pool_hash, trial, size=size)
                    errs.append(relative_l2(pipeline.predict_matrix(surrogate, test_X), test_Y))
                except Exception as e:  # noqa: BLE001
                    failures.append({"preset": preset_name, "size": size,
                                     "trial": trial, "error": str(e)})
            if not errs:
                continue
            mean, std = _aggregate(errs)
            rows.append({
                "model": preset_name, "case": cfg.case, "n_train_fields": size,
                "rel_l2_mean_pct": mean, "rel_l2_std_pct": std,
                "trials": len(errs), "dataset_hash": test_hash,
            })
    meta = _report_meta(cfg, data, failures)
    return EvalReport(rows=rows, meta=meta)


def _report_meta(cfg, data, failures) -> dict[str, Any]:
    return {
        "config_hash": cfg.config_hash(),
        "config": asdict(cfg),
        "dataset_hashes": {k: v[1] for k, v in data.items()},
        "noise_sigma_ref": float(data["test"][0].inputs_matrix().std()),
        "kernel_backend": kernel_backend(),
        "failures": failures,
    }
