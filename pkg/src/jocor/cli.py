"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numeric failure (partial
CSVs are left in place). ``NLL_SEED`` overrides the config's base seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .data import SyntheticSpec, make_synthetic, write_idx_images, write_idx_labels
from .exceptions import (ConfigurationError, DataError, FormatError,
                         NumericError, ShapeError)
from .experiment import load_config, parse_config_file, run_experiment, sweep_lambda


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jocor",
        description="Noisy-label training experiments: joint training with "
                    "agreement regularization plus baselines")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a trainer grid from a config file")
    run.add_argument("--config", required=True, help="key = value config file")
    run.add_argument("--out", default=None, help="override output directory")
    run.add_argument("--jobs", type=int, default=1,
                     help="trainer runs to execute in parallel")

    sweep = sub.add_parser("sweep-lambda",
                           help="sweep the agreement weight on one config")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--lambdas", required=True,
                       help="comma-separated weights, e.g. 0.05,0.35,0.95")
    sweep.add_argument("--out", default=None)
    sweep.add_argument("--jobs", type=int, default=1)

    gen = sub.add_parser("gen-synthetic",
                         help="write a synthetic dataset as IDX files")
    gen.add_argument("--spec", required=True, help="key = value spec file")
    gen.add_argument("--out", default="synthetic_data")
    return parser


def _apply_overrides(cfg, out: str | None) -> None:
    if out is not None:
        cfg.values["output_dir"] = out
    env_seed = os.environ.get("NLL_SEED")
    if env_seed is not None:
        try:
            cfg.values["base_seed"] = int(env_seed)
        except ValueError:
            raise ConfigurationError(
                f"NLL_SEED must be an integer, got {env_seed!r}") from None


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args.out)
    summary = run_experiment(cfg, jobs=args.jobs)
    print(f"wrote artifacts to {cfg.output_dir}")
    for trainer, stats in summary["trainers"].items():
        mean = stats["accuracy_mean"]
        std = stats["accuracy_std"]
        if mean is None:
            print(f"  {trainer}: no epochs")
        else:
            print(f"  {trainer}: accuracy {mean:.4f} +- {std:.4f} "
                  f"(last {summary['last_epochs_averaged']} epochs)")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args.out)
    try:
        lambdas = [float(v) for v in args.lambdas.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(
            f"--lambdas must be comma-separated numbers, got {args.lambdas!r}"
        ) from None
    rows = sweep_lambda(cfg, lambdas, jobs=args.jobs)
    print(f"{'lambda':>8} {'val_acc':>10} {'test_acc':>10} best")
    for row in rows:
        test_acc = row["test_accuracy"]
        test_text = f"{test_acc:.4f}" if test_acc is not None else "-"
        marker = "*" if row["best"] else ""
        print(f"{row['lambda']:>8.2f} {row['validation_accuracy']:>10.4f} "
              f"{test_text:>10} {marker}")
    return 0


def _cmd_gen_synthetic(args) -> int:
    raw = parse_config_file(args.spec)
    known = {"classes", "per_class", "dim", "spread", "seed", "test_per_class"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown spec keys: {', '.join(unknown)}")
    for key in ("classes", "per_class", "dim"):
        if key not in raw:
            raise ConfigurationError(f"spec must set {key}")
    spec = SyntheticSpec(class_count=raw["classes"],
                         per_class=raw["per_class"] + raw.get("test_per_class", 0),
                         dim=raw["dim"],
                         cluster_spread=float(raw.get("spread", 0.1)),
                         seed=raw.get("seed", 0))
    data = make_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    per_class = raw["per_class"]
    test_per_class = raw.get("test_per_class", 0)
    train_idx, test_idx = [], []
    for c in range(spec.class_count):
        block = np.arange(c * spec.per_class, (c + 1) * spec.per_class)
        train_idx.append(block[:per_class])
        test_idx.append(block[per_class:])
    splits = [("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz",
               np.concatenate(train_idx))]
    if test_per_class:
        splits.append(("t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz",
                       np.concatenate(test_idx)))
    for image_name, label_name, idx in splits:
        features = data.features[idx]
        pixels = np.round(np.clip(features, 0.0, 1.0) * 255).astype(np.uint8)
        write_idx_images(out / image_name,
                         pixels.reshape(len(idx), 1, spec.dim))
        write_idx_labels(out / label_name,
                         data.observed_labels[idx].astype(np.uint8))
        print(f"wrote {out / image_name} and {out / label_name} "
              f"({len(idx)} examples)")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "sweep-lambda": _cmd_sweep,
                "gen-synthetic": _cmd_gen_synthetic}
    try:
        return handlers[args.command](args)
    except (ConfigurationError, FormatError, DataError, ShapeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
