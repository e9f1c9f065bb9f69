"""Observation transforms registered for ``build_transform``.

Each transform maps an Information to a new Information, rewriting only the
``observation`` subtree and leaving the input untouched.
"""

from typing import Any, Callable, Dict, Optional

import cv2
import numpy as np

from .errors import RegistryError
from .registry import register_transform

Transform = Callable[[Dict[str, Any]], Dict[str, Any]]


def _map_observation(fn: Callable[[np.ndarray], np.ndarray]) -> Transform:
    def _apply(node):
        if isinstance(node, dict):
            return {k: _apply(v) for k, v in node.items()}
        if isinstance(node, np.ndarray):
            return fn(node)
        return node

    def transform(information: Dict[str, Any]) -> Dict[str, Any]:
        out = dict(information)
        if "observation" in out:
            out["observation"] = _apply(out["observation"])
        return out

    return transform


def resize_image(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Resize an (H, W) or (H, W, C) image, keeping dtype and channel count."""
    if image.ndim not in (2, 3):
        return image
    resized = cv2.resize(image, (width, height), interpolation=cv2.INTER_LINEAR)
    if image.ndim == 3 and resized.ndim == 2:
        resized = resized[:, :, None]
    return resized


@register_transform("resize")
def resize(arg: Optional[str]) -> Transform:
    try:
        height, width = (int(v) for v in (arg or "").lower().split("x"))
    except ValueError:
        raise RegistryError(f"resize expects 'resize(<h>x<w>)', got 'resize({arg})'") from None
    if height <= 0 or width <= 0:
        raise RegistryError(f"resize needs a positive size, got {height}x{width}")
    return _map_observation(lambda a: resize_image(a, height, width) if a.ndim in (2, 3) and a.size > 1 else a)


@register_transform("to-float")
def to_float(arg: Optional[str]) -> Transform:
    return _map_observation(lambda a: a.astype(np.float32))


@register_transform("normalize")
def normalize(arg: Optional[str]) -> Transform:
    """Map the u8 range [0, 255] linearly onto [lo, hi] and clip."""
    try:
        lo, hi = (float(v) for v in (arg or "").split(","))
    except ValueError:
        raise RegistryError(f"normalize expects 'normalize(<lo>,<hi>)', got 'normalize({arg})'") from None
    if not lo < hi:
        raise RegistryError(f"normalize needs lo < hi, got {lo}, {hi}")

    def fn(a: np.ndarray) -> np.ndarray:
        scaled = lo + a.astype(np.float32) / np.float32(255.0) * np.float32(hi - lo)
        return np.clip(scaled, lo, hi).astype(np.float32)

    return _map_observation(fn)
