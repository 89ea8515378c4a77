"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError


def as_vector(x, name: str = "x", dtype=float) -> np.ndarray:
    """Coerce ``x`` to a 1-d float array, rejecting NaN/inf and wrong shapes."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_matrix(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_same_length(*pairs) -> None:
    """``pairs`` are (array, name) tuples; all arrays must share length."""
    lengths = {name: len(arr) for arr, name in pairs}
    if len(set(lengths.values())) > 1:
        raise ValidationError(f"length mismatch: {lengths}")


def check_positive(x, name: str = "x") -> np.ndarray:
    arr = as_vector(x, name)
    if np.any(arr <= 0):
        raise ValidationError(f"{name} must be strictly positive")
    return arr


def check_nonnegative(x, name: str = "x") -> np.ndarray:
    arr = as_vector(x, name)
    if np.any(arr < 0):
        raise ValidationError(f"{name} must be nonnegative")
    return arr


def check_unit_interval(x, name: str = "x") -> np.ndarray:
    arr = as_vector(x, name)
    if np.any((arr < 0) | (arr > 1)):
        raise ValidationError(f"{name} must lie in [0, 1]")
    return arr


def check_weights(w, name: str = "weights", tol: float = 1e-8) -> np.ndarray:
    """A weight vector must be finite and sum to one (within ``tol``)."""
    arr = as_vector(w, name)
    if abs(arr.sum() - 1.0) > tol:
        raise ValidationError(f"{name} must sum to 1, got {arr.sum():.10f}")
    return arr


def check_symmetric(m, name: str = "matrix", tol: float = 1e-12) -> np.ndarray:
    arr = as_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    scale = 1.0 + np.abs(arr).max()
    if np.abs(arr - arr.T).max() > tol * scale:
        raise ValidationError(f"{name} must be symmetric within {tol}")
    return arr
