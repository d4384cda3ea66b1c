"""Command-line entry point.

Subcommands:
    generate     sample initial fields for a case/split and integrate them
    train        fit a surrogate on a dataset container
    predict      run a saved surrogate over a dataset container
    evaluate     score a predictions container against its source dataset
    compare      preset comparison over test / OOD / noisy sets
    sweep-params error vs. trainable-parameter count
    sweep-data   error vs. training-set size

Reports are written as line-delimited JSON plus plot-ready CSV columns; the
aligned text table goes to stdout. Any failed stage exits nonzero.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import harness, pipeline, presets
from .containers import (
    read_dataset,
    read_predictions,
    write_dataset,
    write_predictions,
)
from .core import Grid2D, Scheme


def _add_generate(sub):
    p = sub.add_parser("generate", help="generate a dataset container")
    p.add_argument("--case", required=True, choices=["1", "2", "ood1", "ood2"],
                   help="'1'/'2' draw train/test fields; ood1/ood2 draw the shifted sets")
    p.add_argument("--base-case", choices=["1", "2"], default="1",
                   help="which case's dynamics an OOD set uses")
    p.add_argument("--n-fields", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-n", type=int, default=28)
    p.add_argument("--scheme", choices=[s.value for s in Scheme],
                   default=Scheme.EXPLICIT_SUBSTEP.value)
    p.add_argument("--clip-negative", action="store_true",
                   help="clip sampled initial fields at zero")
    p.add_argument("--workers", type=int, default=1)


def _cmd_generate(args) -> int:
    if args.case in ("1", "2"):
        case, split = f"case{args.case}", "train"
    else:
        case, split = f"case{args.base_case}", args.case
    ds = harness.generate_dataset(
        case, split, args.n_fields, seed=args.seed,
        grid=Grid2D(nx=args.grid_n, ny=args.grid_n),
        scheme=Scheme(args.scheme), clip_negative=args.clip_negative,
        workers=args.workers,
    )
    chash = write_dataset(ds, args.out)
    print(f"wrote {ds.n_fields} trajectories ({case}/{split}) to {args.out}")
    print(f"dataset hash: {chash}")
    return 0


def _add_train(sub):
    p = sub.add_parser("train", help="fit a surrogate on a dataset container")
    p.add_argument("--preset", choices=["u-mpce", "o-mpce", "custom"], required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--case", choices=["1", "2"], default="1")
    p.add_argument("--d-in", type=int)
    p.add_argument("--d-out", type=int)
    p.add_argument("--s-max", type=int, default=2)
    p.add_argument("--pce-penalty", type=float)
    p.add_argument("--identity-output", action="store_true",
                   help="skip the output reduction (input-only variant)")


def _cmd_train(args) -> int:
    ds, chash = read_dataset(args.data)
    case = f"case{args.case}"
    if args.preset == "custom":
        if args.d_in is None or args.d_out is None:
            print("custom preset needs --d-in and --d-out", file=sys.stderr)
            return 2
        base = presets.surrogate_preset(case, "o-mpce")
        cfg = pipeline.MPCEConfig(
            d_in=args.d_in, d_out=args.d_out, s_max=args.s_max,
            input_kernel=base.input_kernel,
            output_kernel=None if args.identity_output else base.output_kernel,
            pce_penalty=base.pce_penalty if args.pce_penalty is None else args.pce_penalty,
        )
    else:
        cfg = presets.surrogate_preset(case, args.preset)
        if args.pce_penalty is not None:
            from dataclasses import replace
            cfg = replace(cfg, pce_penalty=args.pce_penalty)
    surrogate = pipeline.fit(ds, cfg, dataset_hash=chash)
    pipeline.save(surrogate, args.out)
    meta = surrogate.metadata
    print(f"trained on {meta['n_train_fields']} fields in {meta['fit_seconds']:.2f}s; "
          f"{meta['n_params']} parameters; "
          f"training rel L2 {meta['train_rel_l2']:.3f}%")
    print(f"model saved to {args.out}")
    return 0


def _add_predict(sub):
    p = sub.add_parser("predict", help="predict trajectories for a dataset container")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)


def _cmd_predict(args) -> int:
    surrogate = pipeline.load(args.model)
    ds, chash = read_dataset(args.data)
    preds = pipeline.predict_matrix(surrogate, ds.inputs_matrix())
    write_predictions(preds, args.out, dataset_hash=chash,
                      meta={"model": str(args.model)})
    print(f"wrote {preds.shape[0]} predictions to {args.out}")
    return 0


def _add_evaluate(sub):
    p = sub.add_parser("evaluate", help="score predictions against their dataset")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)


def _cmd_evaluate(args) -> int:
    preds, meta = read_predictions(args.pred)
    ds, chash = read_dataset(args.truth)
    if meta.get("source_dataset_hash") != chash:
        print(
            f"refusing to evaluate: predictions were computed for dataset "
            f"{meta.get('source_dataset_hash')}, not {chash}",
            file=sys.stderr,
        )
        return 2
    errs = harness.relative_l2_matrix(preds, ds.outputs_matrix())
    print(f"samples:             {len(errs)}")
    print(f"relative L2 mean:    {errs.mean():.4f}%")
    print(f"relative L2 std:     {errs.std():.4f}%")
    print(f"relative L2 max:     {errs.max():.4f}%")
    return 0


def _add_config_command(sub, name, help_):
    p = sub.add_parser(name, help=help_)
    p.add_argument("--config", required=True, help="JSON experiment config")


def _run_report(kind: str, args) -> int:
    cfg = harness.ExperimentConfig.from_json(args.config)
    runner = {
        "compare": harness.run_comparison,
        "sweep-params": harness.sweep_parameters,
        "sweep-data": harness.sweep_dataset_size,
    }[kind]
    report = runner(cfg)
    out = Path(cfg.out_dir)
    stem = f"{kind.replace('-', '_')}_{cfg.case}_{cfg.config_hash()}"
    report.to_jsonl(out / f"{stem}.jsonl")
    if kind == "sweep-params":
        cols = ["n_params", "d_in", "d_out", "s_max",
                "rel_l2_mean_pct", "rel_l2_std_pct",
                "ood1_rel_l2_mean_pct", "ood1_rel_l2_std_pct"]
    elif kind == "sweep-data":
        cols = ["model", "n_train_fields", "rel_l2_mean_pct", "rel_l2_std_pct"]
    else:
        cols = ["model", "eval_set", "rel_l2_mean_pct", "rel_l2_std_pct", "n_params"]
    report.to_csv(out / f"{stem}.csv", cols)
    print(report.table(cols))
    print(f"\nreport: {out / (stem + '.jsonl')}")
    failures = report.meta.get("failures", [])
    if failures:
        print(f"{len(failures)} stage failure(s); see report meta", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mpce", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_train(sub)
    _add_predict(sub)
    _add_evaluate(sub)
    _add_config_command(sub, "compare", "preset comparison on test/OOD/noisy sets")
    _add_config_command(sub, "sweep-params", "error vs trainable parameter count")
    _add_config_command(sub, "sweep-data", "error vs training-set size")
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "predict":
            return _cmd_predict(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        return _run_report(args.command, args)
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
