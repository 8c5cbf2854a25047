"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .viewer import SpikeTrainError


def check_spike_train(X) -> np.ndarray:
    """1-D float array of strictly increasing spike times (a single column is accepted)."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    arr = check_array(arr, ensure_2d=False, ensure_min_samples=0, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D spike train, got shape {arr.shape}")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise SpikeTrainError("spike times must be strictly increasing")
    return arr


def check_series(X, name: str = "X") -> np.ndarray:
    """(n, 2) array of ``time_ms, frequency_hz`` rows with increasing times."""
    arr = check_array(X, dtype=float)
    if arr.shape[1] != 2:
        raise ValueError(f"{name} must have two columns (time_ms, frequency_hz), got {arr.shape[1]}")
    if arr.shape[0] > 1 and not np.all(np.diff(arr[:, 0]) > 0):
        raise ValueError(f"{name} times must be strictly increasing")
    if np.any(arr[:, 1] < 0):
        raise ValueError(f"{name} frequencies must be >= 0")
    return arr


def check_times(X) -> np.ndarray:
    arr = check_array(np.asarray(X, dtype=float).reshape(-1, 1), dtype=float, ensure_min_samples=0)
    return arr[:, 0]
