"""Shared utility helpers."""

import copy
import hashlib
from typing import Any, Dict

import numpy as np

from .types import LOCAL_KEYS

INLINE_TENSOR_LIMIT = 64


def tensor_checksum(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def to_jsonable(value: Any, path: str = "$") -> Any:
    """Convert a value tree into JSON-compatible data.

    Tensors with fewer than ``INLINE_TENSOR_LIMIT`` elements are inlined as
    nested lists; larger ones are summarized by dtype, shape and checksum.
    """
    if isinstance(value, dict):
        out = {}
        for k, v in value.items():
            if k in LOCAL_KEYS:
                continue
            out[str(k)] = to_jsonable(v, f"{path}.{k}")
        return out
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if isinstance(value, np.ndarray):
        if value.size < INLINE_TENSOR_LIMIT:
            return value.tolist()
        return {"dtype": str(value.dtype), "shape": list(value.shape), "sha256": tensor_checksum(value)}
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if value is None or isinstance(value, (int, float, str)):
        return value
    raise TypeError(f"Cannot serialize value of type {type(value).__name__} at {path}")


def strip_local(information: Dict[str, Any]) -> Dict[str, Any]:
    """Copy of *information* without process-local handles."""
    return {k: copy.deepcopy(v) for k, v in information.items() if k not in LOCAL_KEYS}


def trees_equal(a: Any, b: Any) -> bool:
    """Bitwise comparison of two value trees."""
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(trees_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(trees_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a_arr, b_arr = np.asarray(a), np.asarray(b)
        return a_arr.dtype == b_arr.dtype and a_arr.shape == b_arr.shape and a_arr.tobytes() == b_arr.tobytes()
    return type(a) == type(b) and a == b
