"""Dataset ingestion and generation.

Covers the big-endian IDX container used by MNIST (gzip accepted
transparently by magic-byte sniffing), seeded Gaussian-blob synthetic data
for fast tests, and deterministic train/validation/test splitting.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError, DataError, FormatError, ShapeError
from .validation import fraction_count

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    """Features plus observed labels plus hidden ground truth.

    ``true_labels`` exist for metric computation only; no trainer update path
    reads them.
    """
    features: np.ndarray        # (N, d) float64
    observed_labels: np.ndarray  # (N,) int64
    true_labels: np.ndarray      # (N,) int64
    class_count: int

    def __post_init__(self):
        n = self.features.shape[0]
        if self.observed_labels.shape != (n,) or self.true_labels.shape != (n,):
            raise ShapeError("label vectors must match the feature row count")
        for name, labels in (("observed_labels", self.observed_labels),
                             ("true_labels", self.true_labels)):
            if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
                raise DataError(f"{name} outside [0, {self.class_count})")

    def __len__(self) -> int:
        return int(self.features.shape[0])

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features[indices],
                              self.observed_labels[indices],
                              self.true_labels[indices],
                              self.class_count)


def _read_payload(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_idx(raw: bytes, path, expected_magic: int,
               expected_dims: int) -> tuple[tuple[int, ...], bytes]:
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated header, {len(raw)} bytes at offset 0")
    magic = struct.unpack(">i", raw[:4])[0]
    if magic != expected_magic:
        raise FormatError(f"{path}: bad magic 0x{magic:08x} at offset 0, "
                          f"expected 0x{expected_magic:08x}")
    header_end = 4 + 4 * expected_dims
    if len(raw) < header_end:
        raise FormatError(f"{path}: truncated dimension header at offset {len(raw)}")
    dims = struct.unpack(">" + "i" * expected_dims, raw[4:header_end])
    if any(d < 0 for d in dims):
        raise FormatError(f"{path}: negative dimension {dims} at offset 4")
    expected = int(np.prod(dims)) if dims else 0
    payload = raw[header_end:]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes at offset "
                          f"{header_end}, header promises {expected}")
    return dims, payload


def read_idx_images(path) -> np.ndarray:
    """Raw (N, rows, cols) uint8 image array from an IDX file."""
    dims, payload = _parse_idx(_read_payload(path), path, IMAGE_MAGIC, 3)
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def read_idx_labels(path) -> np.ndarray:
    dims, payload = _parse_idx(_read_payload(path), path, LABEL_MAGIC, 1)
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.ascontiguousarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise ShapeError(f"images must be (N, rows, cols), got {images.shape}")
    header = struct.pack(">iiii", IMAGE_MAGIC, *images.shape)
    _write_payload(path, header + images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if labels.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got {labels.shape}")
    header = struct.pack(">ii", LABEL_MAGIC, labels.shape[0])
    _write_payload(path, header + labels.tobytes())


def _write_payload(path, raw: bytes) -> None:
    path = Path(path)
    if path.suffix == ".gz":
        # mtime pinned so identical content means identical bytes
        path.write_bytes(gzip.compress(raw, mtime=0))
    else:
        path.write_bytes(raw)


def load_idx_dataset(images_path, labels_path,
                     class_count: int | None = None) -> LabeledDataset:
    """IDX image/label pair as a dataset with pixels scaled to [0, 1]."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images_path} has {images.shape[0]} images but "
                          f"{labels_path} has {labels.shape[0]} labels")
    n = images.shape[0]
    features = images.reshape(n, -1).astype(np.float64) / 255.0
    observed = labels.astype(np.int64)
    if class_count is None:
        class_count = int(observed.max()) + 1 if n else 1
    if n and observed.max() >= class_count:
        raise FormatError(f"{labels_path}: label {observed.max()} outside "
                          f"[0, {class_count})")
    return LabeledDataset(features=features, observed_labels=observed,
                          true_labels=observed.copy(), class_count=class_count)


def load_mnist(images_path, labels_path) -> LabeledDataset:
    """MNIST IDX pair: N x 784 features in [0, 1], 10 classes."""
    return load_idx_dataset(images_path, labels_path, class_count=10)


@dataclass(frozen=True)
class SyntheticSpec:
    class_count: int
    per_class: int
    dim: int
    cluster_spread: float
    seed: int

    def __post_init__(self):
        if self.class_count < 2:
            raise ConfigurationError("class_count must be >= 2")
        if self.per_class < 1:
            raise ConfigurationError("per_class must be >= 1")
        if self.dim < 1:
            raise ConfigurationError("dim must be >= 1")
        if self.cluster_spread < 0.0:
            raise ConfigurationError("cluster_spread must be >= 0")


def make_synthetic(spec: SyntheticSpec) -> LabeledDataset:
    """Gaussian blobs around seeded random centers, clipped to [0, 1].

    Deterministic per seed; linearly separable for small spreads.
    """
    rng = np.random.default_rng(spec.seed)
    centers = rng.uniform(0.2, 0.8, size=(spec.class_count, spec.dim))
    # redraw clashing centers so they stay pairwise distinct (bounded retries)
    for _ in range(100):
        diffs = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diffs ** 2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        clashing = np.unique(np.argwhere(dist < 1e-6)[:, 0])
        if clashing.size == 0:
            break
        centers[clashing] = rng.uniform(0.2, 0.8, size=(clashing.size, spec.dim))
    n = spec.class_count * spec.per_class
    labels = np.repeat(np.arange(spec.class_count, dtype=np.int64),
                       spec.per_class)
    noise = rng.standard_normal((n, spec.dim))
    features = np.clip(centers[labels] + spec.cluster_spread * noise, 0.0, 1.0)
    return LabeledDataset(features=features, observed_labels=labels.copy(),
                          true_labels=labels.copy(),
                          class_count=spec.class_count)


def split_dataset(data: LabeledDataset, fractions: tuple[float, float, float],
                  seed: int) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Disjoint, exhaustive (train, validation, test) split by seeded shuffle."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ConfigurationError(f"fractions must be three non-negative values, "
                                 f"got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"fractions must sum to 1, got {sum(fractions)}")
    n = len(data)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = fraction_count(fractions[0], n, rounding="floor")
    n_val = fraction_count(fractions[1], n, rounding="floor")
    train = data.subset(perm[:n_train])
    val = data.subset(perm[n_train:n_train + n_val])
    test = data.subset(perm[n_train + n_val:])
    return train, val, test
