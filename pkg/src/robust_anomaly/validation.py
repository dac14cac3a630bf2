"""Input validation helpers shared by the function API and the estimators."""

import math
import os

import numpy as np

from .exceptions import InputError


def check_sample(x, min_n=1, name="sample"):
    """Return ``x`` as a 1-D float array of finite values with at least ``min_n`` entries."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size < min_n:
        if arr.size == 0:
            raise InputError(f"{name} is empty")
        raise InputError(f"{name} needs at least {min_n} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinite values")
    return arr


def check_matrix(X, min_rows=1, name="X", allow_nan=False):
    """Return ``X`` as a 2-D float array (n, d); 1-D input becomes a single column."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {arr.shape}")
    n, d = arr.shape
    if d < 1:
        raise InputError(f"{name} has no columns")
    if n < min_rows:
        raise InputError(f"{name} needs at least {min_rows} rows, got {n}")
    if allow_nan:
        if np.any(np.isinf(arr)):
            raise InputError(f"{name} contains infinite values")
    elif not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinite values")
    return arr


def check_h(h, n, lower, name="h"):
    """Validate a subset size: ``lower <= h <= n``."""
    if isinstance(h, (bool, np.bool_)) or int(h) != h:
        raise InputError(f"{name} must be an integer, got {h!r}")
    h = int(h)
    if not lower <= h <= n:
        raise InputError(f"{name}={h} out of range [{lower}, {n}]")
    return h


def resolve_h(h, h_frac, n, default):
    """Pick the subset size from an explicit ``h``, a fraction of n, or the default."""
    if h is not None and h_frac is not None:
        raise InputError("give either h or h_frac, not both")
    if h is not None:
        return int(h)
    if h_frac is not None:
        if not 0.0 < h_frac <= 1.0:
            raise InputError(f"h_frac must lie in (0, 1], got {h_frac}")
        return max(1, int(math.floor(h_frac * n)))
    return default


def n_threads():
    """Worker cap from ROBUST_ANOMALY_THREADS (default 1)."""
    raw = os.environ.get("ROBUST_ANOMALY_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
