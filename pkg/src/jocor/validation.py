"""Input validation helpers shared across the estimator API."""

from __future__ import annotations

import inspect
import math

import numpy as np

from .exceptions import DataError, NotFittedError, ShapeError


def check_matrix(a, name: str = "array", *, require_finite: bool = True) -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting bad shapes and non-finite values."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {out.shape}")
    if require_finite and not np.isfinite(out).all():
        raise DataError(f"{name} contains non-finite values")
    return out


def check_labels(y, n_classes: int, name: str = "labels") -> np.ndarray:
    """Coerce to a 1-D int64 label vector with every entry in [0, n_classes)."""
    out = np.asarray(y)
    if out.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {out.shape}")
    if out.size and not np.issubdtype(out.dtype, np.integer):
        as_int = out.astype(np.int64)
        if not np.array_equal(as_int, out):
            raise DataError(f"{name} must be integer class ids")
        out = as_int
    out = out.astype(np.int64)
    if out.size and (out.min() < 0 or out.max() >= n_classes):
        raise DataError(f"{name} must lie in [0, {n_classes}), got range "
                        f"[{out.min()}, {out.max()}]")
    return out


def check_probability_matrix(p, name: str = "probabilities") -> np.ndarray:
    """Validate a (batch, classes) matrix of row-wise probabilities."""
    out = check_matrix(p, name)
    if out.size:
        if out.min() < 0.0 or out.max() > 1.0 + 1e-9:
            raise DataError(f"{name} entries must lie in [0, 1]")
        sums = out.sum(axis=1)
        if np.abs(sums - 1.0).max() > 1e-6:
            raise DataError(f"{name} rows must sum to 1")
    return out


def check_features_labels(X, y, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    X = check_matrix(X, "X")
    y = check_labels(y, n_classes, "y")
    if X.shape[0] != y.shape[0]:
        raise ShapeError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    return X, y


def fraction_count(fraction: float, total: int, *, rounding: str = "ceil") -> int:
    """Number of items selected by a fractional rate.

    Snaps products within 1e-9 of an integer to that integer so binary-float
    artifacts (0.2 * 55 == 11.000000000000002) cannot change the count.
    """
    t = fraction * total
    f = math.floor(t)
    if t - f <= 1e-9:
        count = int(f)
    elif rounding == "ceil":
        count = int(f) + 1
    else:
        count = int(f)
    if rounding == "ceil" and fraction > 0 and count == 0:
        count = 1
    return count


def ensure_fitted(estimator, attribute: str = "networks_") -> None:
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; "
            "call fit() first")


class ParamsMixin:
    """Minimal sklearn-compatible parameter plumbing (get_params/set_params)."""

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [n for n, p in sig.parameters.items()
                if n != "self" and p.kind != p.VAR_KEYWORD]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"Invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters are {sorted(valid)}")
            setattr(self, name, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"
