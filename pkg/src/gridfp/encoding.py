"""JSON encoding of complex arrays as nested [re, im] pairs.

Complex values never travel as strings; each scalar becomes a two-element
list of floats, which round-trips bit-exactly through Python's json module.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError


def encode_complex(arr: np.ndarray) -> list:
    """Encode a complex ndarray as nested lists with [re, im] leaves."""
    arr = np.asarray(arr, dtype=np.complex128)
    stacked = np.stack([arr.real, arr.imag], axis=-1)
    return stacked.tolist()


def decode_complex(data, shape: tuple[int, ...] | None = None, field: str = "value") -> np.ndarray:
    """Decode nested [re, im] lists into a complex ndarray.

    Raises ParseError when the nesting is not a well-formed pair array and
    ParseError naming `field` when a shape was requested but not matched
    (shape errors beyond parsing are the caller's concern).
    """
    try:
        raw = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field '{field}' is not a numeric [re, im] array: {exc}") from None
    if raw.ndim < 1 or raw.shape[-1] != 2:
        raise ParseError(f"field '{field}' must have [re, im] pairs on its last axis")
    out = raw[..., 0] + 1j * raw[..., 1]
    if shape is not None and out.shape != shape:
        raise ParseError(f"field '{field}' has shape {out.shape}, expected {shape}")
    return out
