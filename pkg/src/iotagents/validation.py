"""Input validation helpers shared by all estimators and kernels."""

from __future__ import annotations

import numpy as np


def as_float_array(x, name: str = "array") -> np.ndarray:
    """Coerce to a float64 ndarray and reject non-finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    arr = as_float_array(x, name)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def as_square_matrix(x, name: str = "matrix") -> np.ndarray:
    arr = as_matrix(x, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


def as_vector(x, name: str = "vector", allow_empty: bool = False) -> np.ndarray:
    arr = as_float_array(x, name)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    return arr


def check_same_length(a: np.ndarray, b: np.ndarray, names: str = "inputs") -> None:
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"{names} must have equal length ({a.shape[0]} vs {b.shape[0]})")


def check_labels(labels, n: int) -> np.ndarray:
    """Validate a cluster assignment over n points; returns an int array."""
    lab = np.asarray(labels)
    if lab.ndim != 1 or lab.shape[0] != n:
        raise ValueError(f"labels must be 1-D of length {n}")
    if lab.size and not np.issubdtype(lab.dtype, np.integer):
        if not np.all(lab == lab.astype(int)):
            raise ValueError("labels must be integers")
        lab = lab.astype(int)
    return lab.astype(int)
