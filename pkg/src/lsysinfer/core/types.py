"""Annotated numpy array types usable as pydantic fields."""

from typing import Annotated, Any

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def as_vector(value: Any) -> np.ndarray:
    """Coerce to a finite 1-D float array."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"expected a vector, got an array with shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector entries must be finite")
    return arr


def as_matrix(value: Any, cols: int | None = None) -> np.ndarray:
    """Coerce to a finite 2-D float array; an empty input becomes shape (0, cols)."""
    arr = np.asarray(value, dtype=float)
    if arr.size == 0:
        if arr.ndim == 2 and (cols is None or arr.shape[0] > 0):
            return arr
        return np.zeros((0, cols if cols is not None else 0))
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got an array with shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return arr


def as_mask(value: Any) -> np.ndarray:
    arr = np.asarray(value, dtype=bool)
    if arr.ndim != 1:
        raise ValueError(f"expected a boolean vector, got an array with shape {arr.shape}")
    return arr


def _to_list(arr: np.ndarray) -> list:
    return arr.tolist()


_as_list = PlainSerializer(_to_list, return_type=list)

Vector = Annotated[np.ndarray, BeforeValidator(as_vector), _as_list]
Matrix = Annotated[np.ndarray, BeforeValidator(as_matrix), _as_list]
Mask = Annotated[np.ndarray, BeforeValidator(as_mask), _as_list]
