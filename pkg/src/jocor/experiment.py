"""Experiment harness: config files, seeded trainer grids, and artifacts.

A run corrupts the training labels once per repeat (so every trainer in that
repeat sees the identical observed-label vector), trains each configured
variant, streams per-epoch CSV rows, and finishes with ``summary.json`` plus
``curves.svg``.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (LabeledDataset, SyntheticSpec, load_mnist, make_synthetic,
                   split_dataset)
from .estimators import VARIANT_CLASSES, EpochRecord, evaluate
from .exceptions import ConfigurationError
from .noise import NoiseSpec, corrupt_labels

CSV_COLUMNS = ("epoch", "trainer", "repeat", "test_acc_net1", "test_acc_net2",
               "label_precision", "keep_rate", "lr", "mean_joint_loss")

_DEFAULTS = {
    "dataset": "synthetic",
    # synthetic dataset
    "classes": 10,
    "per_class": 100,
    "test_per_class": 25,
    "dim": 20,
    "spread": 0.3,
    "data_seed": 0,
    # mnist dataset
    "mnist_dir": "",
    "train_images": "",
    "train_labels": "",
    "test_images": "",
    "test_labels": "",
    "train_limit": 0,
    "test_limit": 0,
    "subset_seed": None,  # defaults to data_seed
    # noise injection
    "noise": "none",
    "noise_rate": 0.0,
    # trainers
    "trainers": None,  # required
    "hidden_units": 256,
    "epochs": 200,
    "batch_size": 128,
    "learning_rate": 0.001,
    "lr_decay_start": 80,
    "lr_decay_end": 200,
    "lambda": 0.95,
    "ramp_epochs": 10,
    # repeats / seeding / sweep / output
    "repeats": 1,
    "base_seed": 0,
    "val_fraction": 0.1,
    "output_dir": "runs",
}

_MNIST_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


def parse_config_file(path) -> dict:
    """Parse a flat ``key = value`` config file ('#' starts a comment)."""
    raw: dict = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', "
                                     f"got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{path}:{lineno}: empty key")
        raw[key] = _parse_value(value)
    return raw


def _parse_value(text: str):
    if "," in text:
        return [_parse_scalar(part.strip()) for part in text.split(",")
                if part.strip()]
    return _parse_scalar(text)


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


@dataclass
class ExperimentConfig:
    """Resolved experiment settings (every default filled in)."""
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def trainers(self) -> list[str]:
        return self.values["trainers"]

    @property
    def output_dir(self) -> str:
        return self.values["output_dir"]


def build_config(raw: dict) -> ExperimentConfig:
    unknown = sorted(set(raw) - set(_DEFAULTS))
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    values = dict(_DEFAULTS)
    values.update(raw)
    if values["subset_seed"] is None:
        values["subset_seed"] = values["data_seed"]
    trainers = values["trainers"]
    if trainers is None:
        raise ConfigurationError("config must list trainers, e.g. "
                                 "'trainers = jocor, standard'")
    if isinstance(trainers, str):
        trainers = [trainers]
    bad = [t for t in trainers if t not in VARIANT_CLASSES]
    if bad:
        raise ConfigurationError(
            f"unknown trainers {bad}; choose from {sorted(VARIANT_CLASSES)}")
    if len(set(trainers)) != len(trainers):
        raise ConfigurationError(f"duplicate trainers in {trainers}")
    values["trainers"] = list(trainers)
    if values["dataset"] not in ("synthetic", "mnist"):
        raise ConfigurationError(f"dataset must be 'synthetic' or 'mnist', "
                                 f"got {values['dataset']!r}")
    for key in ("repeats", "epochs", "batch_size"):
        if not isinstance(values[key], int) or values[key] < 0:
            raise ConfigurationError(f"{key} must be a non-negative integer")
    if values["repeats"] < 1:
        raise ConfigurationError("repeats must be >= 1")
    # trainer construction validates the remaining numeric ranges
    NoiseSpec(values["noise"], float(values["noise_rate"]),
              int(values["base_seed"]))
    return ExperimentConfig(values=values)


def load_config(path) -> ExperimentConfig:
    return build_config(parse_config_file(path))


def _mnist_paths(cfg: ExperimentConfig) -> tuple[str, str, str, str]:
    explicit = [cfg["train_images"], cfg["train_labels"], cfg["test_images"],
                cfg["test_labels"]]
    if all(explicit):
        return tuple(explicit)
    if not cfg["mnist_dir"]:
        raise ConfigurationError("mnist dataset needs mnist_dir or explicit "
                                 "train_/test_ image and label paths")
    root = Path(cfg["mnist_dir"])
    paths = []
    for stem in _MNIST_FILES:
        gz = root / f"{stem}.gz"
        plain = root / stem
        if gz.exists():
            paths.append(str(gz))
        elif plain.exists():
            paths.append(str(plain))
        else:
            raise ConfigurationError(f"missing MNIST file {plain} (or .gz)")
    return tuple(paths)


def load_datasets(cfg: ExperimentConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """Clean (train, test) datasets described by the config."""
    if cfg["dataset"] == "synthetic":
        per_class = cfg["per_class"] + cfg["test_per_class"]
        full = make_synthetic(SyntheticSpec(
            class_count=cfg["classes"], per_class=per_class, dim=cfg["dim"],
            cluster_spread=float(cfg["spread"]), seed=cfg["data_seed"]))
        train_idx, test_idx = [], []
        for c in range(cfg["classes"]):
            block = np.arange(c * per_class, (c + 1) * per_class)
            train_idx.append(block[:cfg["per_class"]])
            test_idx.append(block[cfg["per_class"]:])
        return (full.subset(np.concatenate(train_idx)),
                full.subset(np.concatenate(test_idx)))
    tr_images, tr_labels, te_images, te_labels = _mnist_paths(cfg)
    train = load_mnist(tr_images, tr_labels)
    test = load_mnist(te_images, te_labels)
    rng = np.random.default_rng(cfg["subset_seed"])
    if cfg["train_limit"]:
        train = train.subset(np.sort(
            rng.permutation(len(train))[:cfg["train_limit"]]))
    if cfg["test_limit"]:
        test = test.subset(np.sort(
            rng.permutation(len(test))[:cfg["test_limit"]]))
    return train, test


def build_estimator(cfg: ExperimentConfig, variant: str, seed: int,
                    effective_noise: float, **overrides):
    cls = VARIANT_CLASSES[variant]
    kwargs = dict(hidden_units=cfg["hidden_units"], epochs=cfg["epochs"],
                  batch_size=cfg["batch_size"],
                  learning_rate=float(cfg["learning_rate"]),
                  lr_decay_start=cfg["lr_decay_start"],
                  lr_decay_end=cfg["lr_decay_end"],
                  noise_rate=effective_noise, ramp_epochs=cfg["ramp_epochs"],
                  random_state=seed)
    if variant == "jocor":
        kwargs["contrast_weight"] = float(cfg["lambda"])
    kwargs.update(overrides)
    return cls(**kwargs)


def _fmt(value) -> str:
    """Shortest exact decimal text for a float (round-trips bit-identically)."""
    return repr(float(value))


def record_to_row(record: EpochRecord, trainer: str, repeat: int) -> str:
    accs = record.test_accuracies
    net1 = accs[0] if len(accs) > 0 else math.nan
    net2 = accs[1] if len(accs) > 1 else math.nan
    cells = (str(record.epoch), trainer, str(repeat), _fmt(net1), _fmt(net2),
             _fmt(record.label_precision), _fmt(record.keep_rate),
             _fmt(record.learning_rate), _fmt(record.mean_joint_loss))
    return ",".join(cells)


def write_epoch_csv(path, trainer: str, repeat: int,
                    records: list[EpochRecord]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for record in records:
            fh.write(record_to_row(record, trainer, repeat) + "\n")


def read_epoch_csv(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split(",") != list(CSV_COLUMNS):
        raise ConfigurationError(f"{path}: unexpected CSV header")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        row = dict(zip(CSV_COLUMNS, cells))
        row["epoch"] = int(row["epoch"])
        row["repeat"] = int(row["repeat"])
        for key in CSV_COLUMNS[3:]:
            row[key] = float(row[key])
        rows.append(row)
    return rows


def _net_average(record: EpochRecord) -> float:
    finite = [a for a in record.test_accuracies if not math.isnan(a)]
    return sum(finite) / len(finite) if finite else math.nan


def _tail_mean(values: list[float], k: int) -> float | None:
    tail = [v for v in values[-k:] if not math.isnan(v)]
    if not tail:
        return None
    return sum(tail) / len(tail)


def summarize(cfg: ExperimentConfig,
              histories: dict[tuple[str, int], list[EpochRecord]],
              label_hashes: list[str]) -> dict:
    """Last-10-epoch accuracy means +- std across repeats, per trainer."""
    k = min(10, cfg["epochs"]) if cfg["epochs"] else 0
    trainers = {}
    for variant in cfg.trainers:
        per_acc, per_prec = [], []
        for r in range(cfg["repeats"]):
            records = histories[(variant, r)]
            acc = _tail_mean([_net_average(rec) for rec in records], k) if k else None
            prec = _tail_mean([rec.label_precision for rec in records], k) if k else None
            per_acc.append(acc)
            per_prec.append(prec)
        usable = [a for a in per_acc if a is not None]
        trainers[variant] = {
            "accuracy_mean": float(np.mean(usable)) if usable else None,
            "accuracy_std": float(np.std(usable)) if usable else None,
            "per_repeat_accuracy": per_acc,
            "precision_mean": (float(np.mean([p for p in per_prec if p is not None]))
                               if any(p is not None for p in per_prec) else None),
            "per_repeat_precision": per_prec,
        }
    return {
        "config": cfg.values,
        "last_epochs_averaged": k,
        "observed_label_hashes": label_hashes,
        "trainers": trainers,
    }


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    """Run the trainer grid, write CSV/JSON/SVG artifacts, return the summary."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    clean_train, test = load_datasets(cfg)
    spec = NoiseSpec(cfg["noise"], float(cfg["noise_rate"]), cfg["base_seed"])
    transition = spec.transition(clean_train.class_count)
    effective = spec.effective_rate(clean_train.class_count)

    label_hashes = []
    tasks = []
    for r in range(cfg["repeats"]):
        seed = cfg["base_seed"] + r
        corrupted = corrupt_labels(clean_train, transition, seed)
        label_hashes.append(hashlib.sha256(
            corrupted.observed_labels.tobytes()).hexdigest())
        for variant in cfg.trainers:
            tasks.append((variant, r, corrupted, seed))

    def run_one(task):
        variant, r, corrupted, seed = task
        estimator = build_estimator(cfg, variant, seed, effective)
        csv_path = out / f"epochs_{variant}_{r}.csv"
        with open(csv_path, "w") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            fh.flush()

            def stream(record):
                fh.write(record_to_row(record, variant, r) + "\n")
                fh.flush()

            estimator.fit(corrupted.features, corrupted.observed_labels,
                          true_labels=corrupted.true_labels,
                          eval_set=(test.features, test.observed_labels),
                          epoch_callback=stream)
        return (variant, r), estimator.history_

    histories: dict[tuple[str, int], list[EpochRecord]] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_one, t) for t in tasks]
            errors = []
            for fut in futures:
                try:
                    key, history = fut.result()
                    histories[key] = history
                except Exception as err:  # keep partial CSVs, surface first error
                    errors.append(err)
            if errors:
                raise errors[0]
    else:
        for task in tasks:
            key, history = run_one(task)
            histories[key] = history

    summary = summarize(cfg, histories, label_hashes)
    (out / "summary.json").write_text(
        json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    render_curves(out / "curves.svg", cfg.trainers, cfg["repeats"], histories)
    return summary


def sweep_lambda(cfg: ExperimentConfig, lambdas: list[float],
                 jobs: int = 1) -> list[dict]:
    """Train the joint method once per agreement weight on shared corrupted data.

    The validation split is taken before corruption (clean validation); rows
    come back sorted by weight with the best row (by validation accuracy)
    marked.
    """
    unique = sorted(set(float(v) for v in lambdas))
    if len(unique) != len(lambdas):
        warnings.warn("duplicate lambda values were deduplicated")
    if not unique:
        raise ConfigurationError("no lambda values supplied")
    for v in unique:
        if not 0.0 <= v <= 1.0:
            raise ConfigurationError(f"lambda values must lie in [0, 1], got {v}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    clean_train, test = load_datasets(cfg)
    vf = float(cfg["val_fraction"])
    if not 0.0 < vf < 1.0:
        raise ConfigurationError(f"val_fraction must lie in (0, 1), got {vf}")
    train_part, val_part, _ = split_dataset(
        clean_train, (1.0 - vf, vf, 0.0), cfg["data_seed"])
    spec = NoiseSpec(cfg["noise"], float(cfg["noise_rate"]), cfg["base_seed"])
    transition = spec.transition(train_part.class_count)
    effective = spec.effective_rate(train_part.class_count)

    corrupted = [corrupt_labels(train_part, transition, cfg["base_seed"] + r)
                 for r in range(cfg["repeats"])]
    k = min(10, cfg["epochs"]) if cfg["epochs"] else 0

    def run_one(task):
        weight, r = task
        estimator = build_estimator(cfg, "jocor", cfg["base_seed"] + r,
                                    effective, contrast_weight=weight,
                                    n_classes=train_part.class_count)
        estimator.fit(corrupted[r].features, corrupted[r].observed_labels,
                      true_labels=corrupted[r].true_labels,
                      eval_set=(test.features, test.observed_labels))
        val_acc = float(np.mean(evaluate(
            estimator.networks_, val_part.features, val_part.observed_labels)))
        test_acc = _tail_mean([_net_average(rec) for rec in estimator.history_],
                              k) if k else None
        return task, (val_acc, test_acc)

    tasks = [(w, r) for w in unique for r in range(cfg["repeats"])]
    results: dict[tuple[float, int], tuple[float, float | None]] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for task, value in pool.map(run_one, tasks):
                results[task] = value
    else:
        for task in tasks:
            key, value = run_one(task)
            results[key] = value

    rows = []
    for w in unique:
        vals = [results[(w, r)] for r in range(cfg["repeats"])]
        test_accs = [t for _, t in vals if t is not None]
        rows.append({
            "lambda": w,
            "validation_accuracy": float(np.mean([v for v, _ in vals])),
            "test_accuracy": float(np.mean(test_accs)) if test_accs else None,
            "best": False,
        })
    best = max(range(len(rows)), key=lambda i: rows[i]["validation_accuracy"])
    rows[best]["best"] = True
    with open(out / "lambda_sweep.csv", "w") as fh:
        fh.write("lambda,validation_accuracy,test_accuracy,best\n")
        for row in rows:
            fh.write(f"{_fmt(row['lambda'])},{_fmt(row['validation_accuracy'])},"
                     f"{_fmt(row['test_accuracy'] if row['test_accuracy'] is not None else math.nan)},"
                     f"{str(row['best']).lower()}\n")
    (out / "lambda_sweep.json").write_text(
        json.dumps(_jsonable(rows), indent=2) + "\n")
    return rows


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if math.isnan(v) else v
    return value


# --------------------------------------------------------------------------
# SVG rendering

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f")

_WIDTH, _HEIGHT = 860, 640
_LEFT, _RIGHT = 70, 830
_PANELS = {"accuracy": (40, 280), "precision": (370, 610)}


def _epoch_series(histories, trainer, repeats, metric):
    """Per-epoch mean and std across repeats of one metric, nan-aware."""
    runs = [histories[(trainer, r)] for r in range(repeats)]
    epochs = len(runs[0])
    means, stds = [], []
    for e in range(epochs):
        vals = [metric(run[e]) for run in runs]
        vals = [v for v in vals if not math.isnan(v)]
        if vals:
            means.append(float(np.mean(vals)))
            stds.append(float(np.std(vals)))
        else:
            means.append(math.nan)
            stds.append(math.nan)
    return means, stds


def _points(means, y_top, y_bottom, offset=None):
    pts = []
    n = len(means)
    for i, v in enumerate(means):
        value = v if offset is None else v + offset[i]
        if math.isnan(value):
            continue
        value = min(1.0, max(0.0, value))
        x = _LEFT + (_RIGHT - _LEFT) * (i / max(n - 1, 1))
        yy = y_bottom - (y_bottom - y_top) * value
        pts.append(f"{x:.2f},{yy:.2f}")
    return pts


def _axes(fh, y_top, y_bottom, epochs, ylabel):
    fh.write(f'<line x1="{_LEFT}" y1="{y_bottom}" x2="{_RIGHT}" y2="{y_bottom}" '
             f'stroke="#333"/>\n')
    fh.write(f'<line x1="{_LEFT}" y1="{y_top}" x2="{_LEFT}" y2="{y_bottom}" '
             f'stroke="#333"/>\n')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yy = y_bottom - (y_bottom - y_top) * frac
        fh.write(f'<line x1="{_LEFT - 4}" y1="{yy:.2f}" x2="{_LEFT}" '
                 f'y2="{yy:.2f}" stroke="#333"/>\n')
        fh.write(f'<text x="{_LEFT - 8}" y="{yy + 4:.2f}" font-size="11" '
                 f'text-anchor="end">{frac:g}</text>\n')
    ticks = sorted({1, max(1, epochs // 4), max(1, epochs // 2),
                    max(1, 3 * epochs // 4), epochs})
    for t in ticks:
        x = _LEFT + (_RIGHT - _LEFT) * ((t - 1) / max(epochs - 1, 1))
        fh.write(f'<line x1="{x:.2f}" y1="{y_bottom}" x2="{x:.2f}" '
                 f'y2="{y_bottom + 4}" stroke="#333"/>\n')
        fh.write(f'<text x="{x:.2f}" y="{y_bottom + 16}" font-size="11" '
                 f'text-anchor="middle">{t}</text>\n')
    fh.write(f'<text x="{(_LEFT + _RIGHT) / 2}" y="{y_bottom + 30}" '
             f'font-size="12" text-anchor="middle">epoch</text>\n')
    fh.write(f'<text x="18" y="{(y_top + y_bottom) / 2}" font-size="12" '
             f'text-anchor="middle" transform="rotate(-90 18 '
             f'{(y_top + y_bottom) / 2})">{ylabel}</text>\n')


def render_curves(path, trainers: list[str], repeats: int,
                  histories: dict[tuple[str, int], list[EpochRecord]]) -> None:
    """Static two-panel SVG: accuracy and label precision vs epoch."""
    epochs = max(1, len(histories[(trainers[0], 0)]) if trainers else 0)
    with open(path, "w") as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
                 f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">\n')
        fh.write(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>\n')
        fh.write('<text x="20" y="24" font-size="14">test accuracy (top) and '
                 'label precision (bottom) vs epoch</text>\n')
        for panel, metric in (("accuracy", _net_average),
                              ("precision", lambda r: r.label_precision)):
            y_top, y_bottom = _PANELS[panel]
            fh.write(f'<g id="{panel}">\n')
            _axes(fh, y_top, y_bottom, epochs,
                  "test accuracy" if panel == "accuracy" else "label precision")
            for i, trainer in enumerate(trainers):
                color = _PALETTE[i % len(_PALETTE)]
                means, stds = _epoch_series(histories, trainer, repeats, metric)
                if repeats > 1:
                    upper = _points(means, y_top, y_bottom, offset=stds)
                    lower = _points(means, y_top, y_bottom,
                                    offset=[-s for s in stds])
                    if upper and lower:
                        fh.write(f'<polygon class="band" fill="{color}" '
                                 f'opacity="0.15" points="'
                                 f'{" ".join(upper + lower[::-1])}"/>\n')
                pts = _points(means, y_top, y_bottom)
                fh.write(f'<polyline class="{panel}-line" fill="none" '
                         f'stroke="{color}" stroke-width="1.5" '
                         f'points="{" ".join(pts)}"/>\n')
            fh.write('</g>\n')
        fh.write('<g id="legend">\n')
        for i, trainer in enumerate(trainers):
            color = _PALETTE[i % len(_PALETTE)]
            y = 320 + 0 * i
            x = 80 + 130 * i
            fh.write(f'<rect x="{x}" y="{y}" width="14" height="4" '
                     f'fill="{color}"/>\n')
            fh.write(f'<text x="{x + 20}" y="{y + 6}" font-size="12">'
                     f'{trainer}</text>\n')
        fh.write('</g>\n</svg>\n')
