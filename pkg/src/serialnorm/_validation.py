"""Input checking helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidDataError


def as_series(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a float ``(n_samples, dim)`` array and verify it.

    One-dimensional input is treated as a scalar series and reshaped to a
    single column.  Raises ``ValueError`` for shape problems and
    ``InvalidDataError`` for non-finite entries.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"expected a 1-D or 2-D series, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("series must contain at least one observation")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"expected {dim} column(s), got {arr.shape[1]}")
    if not np.isfinite(arr).all():
        raise InvalidDataError("series contains non-finite values")
    return arr


def as_vector(x, dim: int) -> np.ndarray:
    """Coerce a single observation to a finite float vector of length ``dim``."""
    vec = np.asarray(x, dtype=float).reshape(-1)
    if vec.shape[0] != dim:
        raise ValueError(f"expected an observation of length {dim}, got {vec.shape[0]}")
    if not np.isfinite(vec).all():
        raise InvalidDataError("observation contains non-finite values")
    return vec


def centered(x: np.ndarray) -> np.ndarray:
    """Subtract the per-column sample mean."""
    return x - x.mean(axis=0)
