"""End-to-end manifold-PCE surrogate.

Fit: reduce the input fields with kernel PCA, reduce the flattened output
trajectories with a second kernel PCA that also learns a decoder, then fit a
polynomial chaos expansion between the two latent spaces. Predict: project
the new input, evaluate the expansion, decode back to trajectory space.

Setting ``output_kernel=None`` skips the output reduction entirely (the
expansion then regresses the raw flattened outputs), which recovers the
input-reduction-only variant of the method.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import kpca, pce
from .containers import read_container, write_container
from .core import Dataset, Grid2D, ScalarField, unflatten

__all__ = ["MPCEConfig", "MPCESurrogate", "fit", "predict", "predict_matrix", "save", "load"]


@dataclass(frozen=True)
class MPCEConfig:
    d_in: int
    d_out: int
    input_kernel: kpca.KernelSpec = kpca.KernelSpec("rbf")
    output_kernel: kpca.KernelSpec | None = kpca.KernelSpec("poly")
    s_max: int = 2
    pce_penalty: float = 1e-8
    family: str = "hermite_probabilists"
    inverse_ridge: float = 1e-3
    inverse_kernel: kpca.KernelSpec = kpca.KernelSpec("rbf")

    def __post_init__(self):
        if self.d_in < 1 or self.d_out < 1:
            raise ValueError("latent dimensions must be >= 1")


@dataclass(frozen=True)
class MPCESurrogate:
    config: MPCEConfig
    input_kpca: kpca.KPCAModel
    output_kpca: kpca.KPCAModel | None   # None = identity output embedding
    pce_model: pce.PCEModel
    grid: Grid2D
    times: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return self.pce_model.n_params

    @property
    def train_rel_l2(self) -> float:
        return self.metadata["train_rel_l2"]


def fit(train: Dataset, cfg: MPCEConfig, dataset_hash: str | None = None) -> MPCESurrogate:
    """Fit the full surrogate on a dataset; records training diagnostics
    (end-to-end training error, decoder reconstruction error, timings)."""
    t0 = time.perf_counter()
    X = train.inputs_matrix()
    Y = train.outputs_matrix()
    N = X.shape[0]
    if cfg.d_in > N or (cfg.output_kernel is not None and cfg.d_out > N):
        raise ValueError(f"latent dimensions must not exceed N={N}")

    input_model = kpca.fit(X, cfg.input_kernel, cfg.d_in)
    Z_in = input_model.latents

    if cfg.output_kernel is None:
        output_model = None
        Z_out = Y
    else:
        output_model = kpca.fit(Y, cfg.output_kernel, cfg.d_out)
        output_model = kpca.fit_inverse(
            output_model, Y, ridge=cfg.inverse_ridge, latent_kernel=cfg.inverse_kernel
        )
        Z_out = output_model.latents

    pce_model = pce.fit(Z_in, Z_out, cfg.s_max, family=cfg.family, penalty=cfg.pce_penalty)

    surrogate = MPCESurrogate(
        config=cfg,
        input_kpca=input_model,
        output_kpca=output_model,
        pce_model=pce_model,
        grid=train.grid,
        times=np.asarray(train.times),
        metadata={},
    )
    train_pred = predict_matrix(surrogate, X)
    num = np.linalg.norm(train_pred - Y, axis=1)
    den = np.linalg.norm(Y, axis=1)
    rel = num / np.where(den > 0, den, 1.0)
    meta = {
        "n_train_fields": N,
        "dataset_hash": dataset_hash,
        "n_params": pce_model.n_params,
        "effective_d_in": input_model.d,
        "effective_d_out": output_model.d if output_model is not None else Y.shape[1],
        "train_rel_l2": float(rel.mean()),
        "train_rel_l2_max": float(rel.max()),
        "decoder_recon_rel_l2": (
            output_model.inverse.train_recon_rel_l2 if output_model is not None else 0.0
        ),
        "fit_seconds": time.perf_counter() - t0,
    }
    surrogate.metadata.update(meta)
    return surrogate


def predict_matrix(s: MPCESurrogate, X: np.ndarray) -> np.ndarray:
    """Batched prediction: (n, D_in) input fields -> (n, D_out) flattened
    trajectories."""
    Z_in = kpca.transform(s.input_kpca, X)
    Z_out = pce.predict(s.pce_model, Z_in)
    if s.output_kpca is None:
        return np.atleast_2d(Z_out)
    return np.atleast_2d(kpca.inverse_transform(s.output_kpca, Z_out))


def predict(s: MPCESurrogate, h2: ScalarField) -> "np.ndarray | Any":
    """Predict the trajectory for one input field."""
    if h2.grid != s.grid:
        raise ValueError("input field grid differs from the training grid")
    flat = predict_matrix(s, h2.values[None, :])[0]
    return unflatten(flat, s.grid, s.times, h2)


# --- persistence --------------------------------------------------------------


def _kernel_meta(k: kpca.KernelSpec | None):
    return None if k is None else asdict(k)


def _kernel_from_meta(m) -> kpca.KernelSpec | None:
    return None if m is None else kpca.KernelSpec(**m)


def _pack_kpca(prefix: str, model: kpca.KPCAModel, tensors: dict) -> dict:
    tensors[f"{prefix}_training_points"] = model.training_points
    tensors[f"{prefix}_alphas"] = model.alphas
    tensors[f"{prefix}_lambdas"] = model.lambdas
    tensors[f"{prefix}_k_row_means"] = model.k_row_means
    tensors[f"{prefix}_latents"] = model.latents
    meta = {
        "kernel": _kernel_meta(model.kernel),
        "d": model.d,
        "k_total_mean": model.k_total_mean,
    }
    if model.inverse is not None:
        tensors[f"{prefix}_inverse_coeffs"] = model.inverse.coeffs
        tensors[f"{prefix}_inverse_mean"] = model.inverse.ambient_mean
        meta["inverse"] = {
            "kernel": _kernel_meta(model.inverse.kernel),
            "ridge": model.inverse.ridge,
            "train_recon_rel_l2": model.inverse.train_recon_rel_l2,
        }
    return meta


def _unpack_kpca(prefix: str, meta: dict, tensors: dict) -> kpca.KPCAModel:
    model = kpca.KPCAModel(
        training_points=tensors[f"{prefix}_training_points"],
        kernel=_kernel_from_meta(meta["kernel"]),
        alphas=tensors[f"{prefix}_alphas"],
        lambdas=tensors[f"{prefix}_lambdas"],
        d=int(meta["d"]),
        k_row_means=tensors[f"{prefix}_k_row_means"],
        k_total_mean=float(meta["k_total_mean"]),
        latents=tensors[f"{prefix}_latents"],
    )
    if "inverse" in meta:
        inv_meta = meta["inverse"]
        inv = kpca.InverseMap(
            latents=model.latents,
            coeffs=tensors[f"{prefix}_inverse_coeffs"],
            ambient_mean=tensors[f"{prefix}_inverse_mean"],
            kernel=_kernel_from_meta(inv_meta["kernel"]),
            ridge=float(inv_meta["ridge"]),
            train_recon_rel_l2=float(inv_meta["train_recon_rel_l2"]),
        )
        from dataclasses import replace

        model = replace(model, inverse=inv)
    return model


def save(s: MPCESurrogate, directory) -> str:
    """Write the surrogate as a model container; returns its content hash."""
    tensors: dict[str, np.ndarray] = {
        "pce_coeffs": s.pce_model.coeffs,
        "pce_loc": s.pce_model.loc,
        "pce_scale": s.pce_model.scale,
        "times": s.times,
    }
    meta: dict[str, Any] = {
        "config": {
            "d_in": s.config.d_in,
            "d_out": s.config.d_out,
            "input_kernel": _kernel_meta(s.config.input_kernel),
            "output_kernel": _kernel_meta(s.config.output_kernel),
            "s_max": s.config.s_max,
            "pce_penalty": s.config.pce_penalty,
            "family": s.config.family,
            "inverse_ridge": s.config.inverse_ridge,
            "inverse_kernel": _kernel_meta(s.config.inverse_kernel),
        },
        "grid": {
            "nx": s.grid.nx, "ny": s.grid.ny,
            "x_min": s.grid.x_min, "x_max": s.grid.x_max,
            "y_min": s.grid.y_min, "y_max": s.grid.y_max,
        },
        "pce": {
            "k": s.pce_model.k,
            "s_max": s.pce_model.index_set.s_max,
            "family": s.pce_model.family,
            "penalty": s.pce_model.penalty,
        },
        "metadata": s.metadata,
        "input_kpca": _pack_kpca("in", s.input_kpca, tensors),
    }
    if s.output_kpca is not None:
        meta["output_kpca"] = _pack_kpca("out", s.output_kpca, tensors)
    return write_container(directory, "mpce_model", meta, tensors)


def load(directory) -> MPCESurrogate:
    """Load a model container written by :func:`save`; predictions after a
    round trip are bit-identical."""
    meta, tensors, _ = read_container(directory, kind="mpce_model")
    cfg_meta = meta["config"]
    cfg = MPCEConfig(
        d_in=int(cfg_meta["d_in"]),
        d_out=int(cfg_meta["d_out"]),
        input_kernel=_kernel_from_meta(cfg_meta["input_kernel"]),
        output_kernel=_kernel_from_meta(cfg_meta["output_kernel"]),
        s_max=int(cfg_meta["s_max"]),
        pce_penalty=float(cfg_meta["pce_penalty"]),
        family=cfg_meta["family"],
        inverse_ridge=float(cfg_meta["inverse_ridge"]),
        inverse_kernel=_kernel_from_meta(cfg_meta["inverse_kernel"]),
    )
    pmeta = meta["pce"]
    index_set = pce.total_degree_set(int(pmeta["k"]), int(pmeta["s_max"]))
    pce_model = pce.PCEModel(
        index_set=index_set,
        family=pmeta["family"],
        coeffs=tensors["pce_coeffs"],
        loc=tensors["pce_loc"],
        scale=tensors["pce_scale"],
        penalty=float(pmeta["penalty"]),
    )
    gm = meta["grid"]
    grid = Grid2D(nx=int(gm["nx"]), ny=int(gm["ny"]),
                  x_min=gm["x_min"], x_max=gm["x_max"],
                  y_min=gm["y_min"], y_max=gm["y_max"])
    return MPCESurrogate(
        config=cfg,
        input_kpca=_unpack_kpca("in", meta["input_kpca"], tensors),
        output_kpca=(
            _unpack_kpca("out", meta["output_kpca"], tensors)
            if "output_kpca" in meta else None
        ),
        pce_model=pce_model,
        grid=grid,
        times=tensors["times"],
        metadata=dict(meta["metadata"]),
    )
