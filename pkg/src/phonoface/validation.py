"""Small input-validation helpers used across the public API."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def as_float_array(x, name: str = "array", ndim: int | None = None) -> np.ndarray:
    """Coerce to a float64 ndarray, optionally enforcing dimensionality."""
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def check_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_equal_lengths(a, b, names: str = "inputs") -> None:
    if len(a) != len(b):
        raise ValueError(f"{names} must have equal lengths, got {len(a)} and {len(b)}")


def spectrogram_batch(X, name: str = "X") -> np.ndarray:
    """Coerce a collection of spectrograms to a (batch, n_mels, n_frames) array.

    Accepts a 3-D array, a single 2-D array, or a sequence of 2-D arrays /
    objects with a ``bins`` attribute (one spectrogram each).
    """
    if hasattr(X, "bins"):
        X = [X]
    if isinstance(X, np.ndarray):
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3:
            raise ShapeError(f"{name} must be 2-D or 3-D, got shape {X.shape}")
        return np.asarray(X, dtype=np.float64)
    mats = [np.asarray(getattr(s, "bins", s), dtype=np.float64) for s in X]
    if not mats:
        raise ValueError(f"{name} is empty")
    shape = mats[0].shape
    for i, m in enumerate(mats):
        if m.ndim != 2:
            raise ShapeError(f"{name}[{i}] must be 2-D, got shape {m.shape}")
        if m.shape != shape:
            raise ShapeError(f"{name}[{i}] has shape {m.shape}, expected {shape}")
    return np.stack(mats)
