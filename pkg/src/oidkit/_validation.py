"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_float_array(x, name: str, ndim: int | None = None) -> np.ndarray:
    """Coerce to a float64 ndarray, rejecting NaN/inf and wrong dimensionality."""
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr


def as_vector(x, name: str, size: int | None = None) -> np.ndarray:
    """Coerce to a finite 1-D float vector, optionally of fixed size."""
    vec = as_float_array(x, name, ndim=1)
    if size is not None and vec.size != size:
        raise ValueError(f"{name} must have length {size}, got {vec.size}")
    return vec


def check_positive(value: float, name: str, strict: bool = True) -> float:
    value = float(value)
    if strict and not value > 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return value


def check_in_range(value: float, lo: float, hi: float, name: str) -> float:
    value = float(value)
    if not (lo <= value <= hi):
        raise ValueError(f"{name} must lie in [{lo}, {hi}], got {value}")
    return value


def check_probability(value: float, name: str) -> float:
    return check_in_range(value, 0.0, 1.0, name)


def check_bounds_pair(bounds, name: str) -> tuple[float, float]:
    """Validate a (lo, hi) pair with lo < hi."""
    lo, hi = float(bounds[0]), float(bounds[1])
    if not np.isfinite(lo) or not np.isfinite(hi) or not lo < hi:
        raise ValueError(f"{name} must be a finite (lo, hi) pair with lo < hi, got {bounds!r}")
    return lo, hi


def check_rng(rng) -> np.random.Generator:
    """Accept a Generator or a seed; always return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
