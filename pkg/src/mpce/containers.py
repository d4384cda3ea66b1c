"""Self-describing on-disk containers for datasets, models and predictions.

A container is one directory holding ``manifest.json`` plus one flat binary
blob per tensor. The blob format is deliberately trivial so any language can
read it without third-party code:

    bytes 0..7    magic  b"MPCEBIN1"
    bytes 8..9    dtype code, little-endian u16 (1 = float64 little-endian)
    bytes 10..11  ndim, little-endian u16 (1..4)
    bytes 12..27  dims, 4 x little-endian u32 (unused trail as 0)
    bytes 28..31  reserved, zero
    bytes 32..    payload, C-order float64 little-endian

The manifest records schema version, container kind, free-form metadata and
a sha256 per tensor file; ``content_hash`` ties them together so tampering
or truncation is detected on load. Predictions carry the content hash of the
dataset they were computed from, and evaluation refuses mismatched pairs.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .core import CaseLabel, Dataset, Grid2D, ScalarField, Trajectory, unflatten

__all__ = [
    "ContainerError",
    "SCHEMA_VERSION",
    "write_tensor",
    "read_tensor",
    "write_container",
    "read_container",
    "write_dataset",
    "read_dataset",
    "write_predictions",
    "read_predictions",
]

SCHEMA_VERSION = 1

_MAGIC = b"MPCEBIN1"
_HEADER = struct.Struct("<8sHH4I4x")  # 32 bytes
_DTYPE_F64 = 1


class ContainerError(Exception):
    """Raised on malformed, truncated or tampered containers."""


def write_tensor(path: Path, array: np.ndarray) -> None:
    a = np.ascontiguousarray(array, dtype="<f8")
    if a.ndim < 1 or a.ndim > 4:
        raise ContainerError(f"tensor rank {a.ndim} outside supported 1..4")
    dims = list(a.shape) + [0] * (4 - a.ndim)
    header = _HEADER.pack(_MAGIC, _DTYPE_F64, a.ndim, *dims)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(a.tobytes(order="C"))


def read_tensor(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ContainerError(f"{path}: truncated header")
    magic, dtype, ndim, d0, d1, d2, d3 = _HEADER.unpack(raw[: _HEADER.size])
    if magic != _MAGIC:
        raise ContainerError(f"{path}: bad magic {magic!r}")
    if dtype != _DTYPE_F64:
        raise ContainerError(f"{path}: unsupported dtype code {dtype}")
    if not 1 <= ndim <= 4:
        raise ContainerError(f"{path}: bad ndim {ndim}")
    dims = (d0, d1, d2, d3)[:ndim]
    n = int(np.prod(dims))
    expected = _HEADER.size + 8 * n
    if len(raw) != expected:
        raise ContainerError(f"{path}: payload is {len(raw)} bytes, expected {expected}")
    a = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(dims)
    return a.astype(np.float64, copy=True)


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _content_hash(kind: str, meta: Mapping[str, Any], tensor_hashes: Mapping[str, str]) -> str:
    blob = json.dumps(
        {"schema_version": SCHEMA_VERSION, "kind": kind, "meta": meta,
         "tensors": dict(sorted(tensor_hashes.items()))},
        sort_keys=True, separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode()).hexdigest()


def write_container(
    directory: Path | str,
    kind: str,
    meta: Mapping[str, Any],
    tensors: Mapping[str, np.ndarray],
) -> str:
    """Write a container; returns its content hash."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    hashes = {}
    for name, arr in tensors.items():
        fname = f"{name}.bin"
        write_tensor(directory / fname, arr)
        sha = _sha256_file(directory / fname)
        entries[name] = {"file": fname, "sha256": sha, "dims": list(np.shape(arr))}
        hashes[name] = sha
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "meta": dict(meta),
        "tensors": entries,
        "content_hash": _content_hash(kind, meta, hashes),
    }
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest["content_hash"]


def read_container(
    directory: Path | str,
    kind: str | None = None,
) -> tuple[dict[str, Any], dict[str, np.ndarray], str]:
    """Read and verify a container; returns (meta, tensors, content_hash)."""
    directory = Path(directory)
    mpath = directory / "manifest.json"
    if not mpath.exists():
        raise ContainerError(f"{directory}: no manifest.json")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise ContainerError(f"{mpath}: invalid JSON ({e})") from e
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ContainerError(
            f"{directory}: schema version {version} not supported (expected {SCHEMA_VERSION})"
        )
    if kind is not None and manifest.get("kind") != kind:
        raise ContainerError(
            f"{directory}: container kind {manifest.get('kind')!r}, expected {kind!r}"
        )
    tensors = {}
    hashes = {}
    for name, entry in manifest.get("tensors", {}).items():
        fpath = directory / entry["file"]
        if not fpath.exists():
            raise ContainerError(f"{directory}: missing tensor file {entry['file']}")
        sha = _sha256_file(fpath)
        if sha != entry["sha256"]:
            raise ContainerError(f"{directory}: hash mismatch for tensor {name!r}")
        hashes[name] = sha
        tensors[name] = read_tensor(fpath)
    expected = _content_hash(manifest["kind"], manifest["meta"], hashes)
    if manifest.get("content_hash") != expected:
        raise ContainerError(f"{directory}: manifest content hash mismatch")
    return manifest["meta"], tensors, manifest["content_hash"]


# --- dataset containers -----------------------------------------------------


def _grid_meta(grid: Grid2D) -> dict[str, Any]:
    return {
        "nx": grid.nx, "ny": grid.ny,
        "x_min": grid.x_min, "x_max": grid.x_max,
        "y_min": grid.y_min, "y_max": grid.y_max,
    }


def _grid_from_meta(m: Mapping[str, Any]) -> Grid2D:
    return Grid2D(
        nx=int(m["nx"]), ny=int(m["ny"]),
        x_min=float(m["x_min"]), x_max=float(m["x_max"]),
        y_min=float(m["y_min"]), y_max=float(m["y_max"]),
    )


def write_dataset(ds: Dataset, directory: Path | str) -> str:
    """Persist a dataset; returns the dataset content hash."""
    meta = {
        "case": ds.case_label.value,
        "grid": _grid_meta(ds.grid),
        "nt": ds.nt,
        "n_fields": ds.n_fields,
        "n_points": ds.n_points,
        "generation": ds.generation_config,
    }
    tensors = {
        "inputs": ds.inputs_matrix(),
        "outputs": ds.outputs_matrix(),
        "times": ds.times,
    }
    return write_container(directory, "dataset", meta, tensors)


def read_dataset(directory: Path | str) -> tuple[Dataset, str]:
    """Load a dataset container; returns (dataset, content_hash)."""
    meta, tensors, chash = read_container(directory, kind="dataset")
    grid = _grid_from_meta(meta["grid"])
    times = tensors["times"]
    inputs = tensors["inputs"]
    outputs = tensors["outputs"]
    if inputs.shape[0] != outputs.shape[0]:
        raise ContainerError(f"{directory}: inputs/outputs sample counts differ")
    trajs = []
    for i in range(inputs.shape[0]):
        h2 = ScalarField(grid, inputs[i])
        trajs.append(unflatten(outputs[i], grid, times, h2))
    ds = Dataset(
        case_label=CaseLabel(meta["case"]),
        trajectories=tuple(trajs),
        generation_config=meta.get("generation"),
    )
    return ds, chash


# --- prediction containers ---------------------------------------------------


def write_predictions(
    predictions: np.ndarray,
    directory: Path | str,
    dataset_hash: str,
    meta: Mapping[str, Any] | None = None,
) -> str:
    """Persist a (N, D_out) prediction matrix tied to its source dataset."""
    full_meta = dict(meta or {})
    full_meta["source_dataset_hash"] = dataset_hash
    predictions = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    tensors = {"predictions": predictions} if predictions.size else {}
    full_meta["n_predictions"] = int(predictions.shape[0]) if predictions.size else 0
    return write_container(directory, "predictions", full_meta, tensors)


def read_predictions(directory: Path | str) -> tuple[np.ndarray, dict[str, Any]]:
    meta, tensors, _ = read_container(directory, kind="predictions")
    if "predictions" not in tensors:
        preds = np.zeros((0, 0))
    else:
        preds = tensors["predictions"]
    return preds, meta
