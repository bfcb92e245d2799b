"""Label-corruption transition matrices and their application to clean data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .exceptions import ConfigurationError, ShapeError

NOISE_KINDS = ("symmetric", "asymmetric", "none")


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix q where q[i, j] = Pr[observed j | true i]."""
    matrix: np.ndarray

    def __post_init__(self):
        q = self.matrix
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ShapeError(f"transition matrix must be square, got {q.shape}")
        if q.min() < 0.0 or q.max() > 1.0:
            raise ConfigurationError("transition entries must lie in [0, 1]")
        if np.abs(q.sum(axis=1) - 1.0).max() > 1e-12:
            raise ConfigurationError("transition rows must sum to 1")

    @property
    def class_count(self) -> int:
        return int(self.matrix.shape[0])


def symmetric_transition(class_count: int, rate: float) -> TransitionMatrix:
    """Keep each label with probability 1 - rate, flip uniformly otherwise."""
    if class_count < 2:
        raise ConfigurationError("symmetric noise needs at least 2 classes")
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"symmetric rate must lie in [0, 1), got {rate}")
    q = np.full((class_count, class_count), rate / (class_count - 1))
    np.fill_diagonal(q, 1.0 - rate)
    return TransitionMatrix(q)


def asymmetric_transition(class_count: int, rate: float) -> TransitionMatrix:
    """Flip even-index classes to the next class with the given probability.

    Odd-index classes stay clean, so exactly ceil(m/2) rows are noisy and the
    overall flip fraction under uniform priors is rate * ceil(m/2) / m.
    """
    if class_count < 2:
        raise ConfigurationError("asymmetric noise needs at least 2 classes")
    if not 0.0 <= rate <= 0.5:
        raise ConfigurationError(f"asymmetric per-class rate must lie in "
                                 f"[0, 0.5], got {rate}")
    q = np.eye(class_count)
    for i in range(0, class_count, 2):
        q[i, i] = 1.0 - rate
        q[i, (i + 1) % class_count] += rate
    return TransitionMatrix(q)


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    rate: float
    seed: int

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigurationError(f"noise kind must be one of {NOISE_KINDS}, "
                                     f"got {self.kind!r}")
        if self.kind == "symmetric" and not 0.0 <= self.rate < 1.0:
            raise ConfigurationError("symmetric rate must lie in [0, 1)")
        if self.kind == "asymmetric" and not 0.0 <= self.rate <= 0.5:
            raise ConfigurationError("asymmetric rate must lie in [0, 0.5]")

    def effective_rate(self, class_count: int) -> float:
        """Expected overall flip fraction under uniform class priors."""
        if self.kind == "none":
            return 0.0
        if self.kind == "symmetric":
            return self.rate
        noisy_rows = (class_count + 1) // 2
        return self.rate * noisy_rows / class_count

    def transition(self, class_count: int) -> TransitionMatrix:
        if self.kind == "none":
            return TransitionMatrix(np.eye(class_count))
        if self.kind == "symmetric":
            return symmetric_transition(class_count, self.rate)
        return asymmetric_transition(class_count, self.rate)


def corrupt_labels(clean: LabeledDataset, q: TransitionMatrix,
                   seed: int) -> LabeledDataset:
    """Resample each observed label from its transition row, independently.

    One categorical draw per example in dataset index order from a seeded
    generator; features and true labels are carried through untouched.
    """
    if clean.class_count != q.class_count:
        raise ConfigurationError(f"dataset has {clean.class_count} classes but "
                                 f"transition matrix has {q.class_count}")
    rng = np.random.default_rng(seed)
    u = rng.random(len(clean))
    cumulative = np.cumsum(q.matrix, axis=1)[clean.observed_labels]
    new_labels = (cumulative < u[:, None]).sum(axis=1).astype(np.int64)
    np.minimum(new_labels, q.class_count - 1, out=new_labels)
    return LabeledDataset(features=clean.features,
                          observed_labels=new_labels,
                          true_labels=clean.true_labels,
                          class_count=clean.class_count)
