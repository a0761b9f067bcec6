"""Input validation helpers shared by all estimators and functions."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError


def as_1d_array(x, name: str = "x", dtype=np.float64, allow_complex: bool = False):
    """Coerce to a contiguous 1-d ndarray and reject NaN/Inf.

    Complex input is allowed only when ``allow_complex`` is set; otherwise a
    complex array raises ``TypeError``.
    """
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        if not allow_complex:
            raise TypeError(f"{name} must be real-valued")
        arr = np.ascontiguousarray(arr, dtype=np.complex128)
    else:
        arr = np.ascontiguousarray(arr, dtype=dtype)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_pam2(symbols, name: str = "symbols") -> np.ndarray:
    """Validate a PAM2 symbol sequence; every element must be -1 or +1."""
    arr = np.asarray(symbols)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d")
    vals = np.unique(arr)
    if not np.all(np.isin(vals, (-1, 1))):
        raise ValueError(f"{name} must contain only -1/+1, got values {vals[:8]}")
    return np.ascontiguousarray(arr, dtype=np.int8)


def check_bits(bits, name: str = "bits") -> np.ndarray:
    """Validate a 0/1 bit sequence."""
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d")
    vals = np.unique(arr)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError(f"{name} must contain only 0/1")
    return np.ascontiguousarray(arr, dtype=np.int8)


def check_positive(value, name: str):
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value


def check_nonzero_signal(x: np.ndarray, name: str = "signal") -> np.ndarray:
    """Reject all-zero / zero-power records before statistics are taken."""
    if x.size == 0 or not np.any(x != 0):
        raise DegenerateInputError(f"{name} has zero power")
    return x
