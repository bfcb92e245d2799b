"""Per-example losses, the keep-rate schedule, and small-loss selection.

The joint per-example loss blends a two-network cross-entropy term with a
symmetric-KL agreement term:

    joint[i] = (1 - w) * supervised[i] + w * agreement[i]

Batch reduction happens only in ``reduce_selected`` (the mean over the kept
subset). Probabilities are clamped to [PROB_FLOOR, 1] before any logarithm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DataError, ShapeError
from .nn import PROB_FLOOR
from .validation import check_labels, check_probability_matrix, fraction_count


def _clamp(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_FLOOR, 1.0)


def cross_entropy(p: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-example negative log likelihood of the observed label."""
    p = check_probability_matrix(p, "p")
    labels = check_labels(labels, p.shape[1], "labels")
    if labels.shape[0] != p.shape[0]:
        raise ShapeError(f"{labels.shape[0]} labels for {p.shape[0]} rows")
    c = _clamp(p)
    return -np.log(c[np.arange(p.shape[0]), labels])


def cross_entropy_gradient(p: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Unreduced d(cross_entropy)/dp, one row per example."""
    p = np.asarray(p, dtype=np.float64)
    c = _clamp(p)
    grad = np.zeros_like(p)
    rows = np.arange(p.shape[0])
    grad[rows, labels] = -1.0 / c[rows, labels]
    grad *= p > PROB_FLOOR  # clamp saturates: no gradient through floored entries
    return grad


def supervised_loss(p1: np.ndarray, p2: np.ndarray,
                    labels: np.ndarray) -> np.ndarray:
    """Per-example cross-entropy summed over the two networks."""
    _check_pair(p1, p2)
    return cross_entropy(p1, labels) + cross_entropy(p2, labels)


def contrastive_loss(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Per-example symmetric KL divergence between the two prediction rows."""
    p1, p2 = _check_pair(p1, p2)
    c1, c2 = _clamp(p1), _clamp(p2)
    log1, log2 = np.log(c1), np.log(c2)
    kl_12 = (c1 * (log1 - log2)).sum(axis=1)
    kl_21 = (c2 * (log2 - log1)).sum(axis=1)
    return kl_12 + kl_21


@dataclass
class LossBreakdown:
    supervised: np.ndarray
    agreement: np.ndarray
    joint: np.ndarray
    contrast_weight: float


def joint_loss(p1: np.ndarray, p2: np.ndarray, labels: np.ndarray,
               contrast_weight: float) -> LossBreakdown:
    """Blend the supervised and agreement vectors; no batch reduction."""
    if not 0.0 <= contrast_weight <= 1.0:
        raise ConfigurationError(f"contrast_weight must lie in [0, 1], got "
                                 f"{contrast_weight}")
    sup = supervised_loss(p1, p2, labels)
    con = contrastive_loss(p1, p2)
    joint = (1.0 - contrast_weight) * sup + contrast_weight * con
    return LossBreakdown(supervised=sup, agreement=con, joint=joint,
                         contrast_weight=contrast_weight)


def joint_loss_gradients(p1: np.ndarray, p2: np.ndarray, labels: np.ndarray,
                         contrast_weight: float) -> tuple[np.ndarray, np.ndarray]:
    """Unreduced per-example gradients of the joint loss w.r.t. p1 and p2.

    For the symmetric KL term, d/dp1 = log(p1/p2) + 1 - p2/p1 (and symmetrically
    for p2); entries at the probability floor get zero gradient.
    """
    if not 0.0 <= contrast_weight <= 1.0:
        raise ConfigurationError(f"contrast_weight must lie in [0, 1], got "
                                 f"{contrast_weight}")
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    c1, c2 = _clamp(p1), _clamp(p2)
    log_ratio = np.log(c1) - np.log(c2)
    dcon1 = log_ratio + 1.0 - c2 / c1
    dcon2 = -log_ratio + 1.0 - c1 / c2
    w = contrast_weight
    d1 = (1.0 - w) * cross_entropy_gradient(p1, labels) + w * dcon1 * (p1 > PROB_FLOOR)
    d2 = (1.0 - w) * cross_entropy_gradient(p2, labels) + w * dcon2 * (p2 > PROB_FLOOR)
    return d1, d2


@dataclass(frozen=True)
class KeepSchedule:
    """Keep-rate ramp: 1 at epoch 0, down to 1 - noise_rate after ramp_epochs."""
    noise_rate: float
    ramp_epochs: int

    def __post_init__(self):
        if not 0.0 <= self.noise_rate < 1.0:
            raise ConfigurationError(f"noise_rate must lie in [0, 1), got "
                                     f"{self.noise_rate}")
        if self.ramp_epochs < 1:
            raise ConfigurationError("ramp_epochs must be >= 1")


def keep_rate(schedule: KeepSchedule, epoch: int) -> float:
    """Fraction of each mini-batch retained at the given epoch (0-based)."""
    if epoch < 0:
        raise ConfigurationError("epoch must be >= 0")
    tau = schedule.noise_rate
    rate = 1.0 - min(epoch / schedule.ramp_epochs * tau, tau)
    return min(1.0, max(rate, 1.0 - tau))


@dataclass
class Selection:
    """Indices of the examples kept by small-loss selection."""
    kept_indices: np.ndarray  # sorted ascending
    keep_rate: float

    def __len__(self) -> int:
        return int(self.kept_indices.shape[0])


def select_small_loss(joint: np.ndarray, rate: float) -> Selection:
    """Keep the ceil(rate * batch) smallest-loss examples.

    Ties break toward the lower batch index; returned indices are sorted.
    """
    joint = np.asarray(joint, dtype=np.float64)
    if joint.ndim != 1:
        raise ShapeError(f"loss vector must be 1-D, got shape {joint.shape}")
    if joint.shape[0] == 0:
        raise DataError("cannot select from an empty batch")
    if not 0.0 < rate <= 1.0:
        raise ConfigurationError(f"keep rate must lie in (0, 1], got {rate}")
    k = fraction_count(rate, joint.shape[0], rounding="ceil")
    order = np.argsort(joint, kind="stable")
    kept = np.sort(order[:k]).astype(np.int64)
    return Selection(kept_indices=kept, keep_rate=float(rate))


def reduce_selected(joint: np.ndarray, selection: Selection) -> float:
    """Arithmetic mean of the joint loss over the kept examples."""
    joint = np.asarray(joint, dtype=np.float64)
    kept = selection.kept_indices
    if kept.shape[0] == 0:
        raise DataError("selection is empty")
    if kept.min() < 0 or kept.max() >= joint.shape[0]:
        raise DataError("selection indices out of range for this batch")
    return float(joint[kept].mean())


def _check_pair(p1, p2) -> tuple[np.ndarray, np.ndarray]:
    p1 = check_probability_matrix(p1, "p1")
    p2 = check_probability_matrix(p2, "p2")
    if p1.shape != p2.shape:
        raise ShapeError(f"p1 shape {p1.shape} does not match p2 shape {p2.shape}")
    return p1, p2
