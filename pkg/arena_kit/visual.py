"""Lossless image dumps for rgb, mask and depth arrays."""

import json
from pathlib import Path
from typing import Tuple, Union

import cv2
import numpy as np

from .errors import ImageShapeError

PathLike = Union[str, Path]


def _ensure_parent(path: PathLike) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return str(path)


def save_image(path: PathLike, image: np.ndarray) -> None:
    """Write a u8 (H, W, 1|3) RGB image as PNG."""
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] not in (1, 3):
        raise ImageShapeError(f"Expected u8 (H, W, 1|3) image, got {image.dtype} {image.shape}")
    out = image[:, :, 0] if image.shape[2] == 1 else cv2.cvtColor(image, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(_ensure_parent(path), out):
        raise OSError(f"Could not write image: {path}")


def load_image(path: PathLike) -> np.ndarray:
    """Read a PNG written by :func:`save_image` back as RGB (or single channel)."""
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise OSError(f"Could not read image: {path}")
    if data.ndim == 2:
        return data[:, :, None]
    return cv2.cvtColor(data, cv2.COLOR_BGR2RGB)


def save_mask(path: PathLike, mask: np.ndarray) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ImageShapeError(f"Expected (H, W) mask, got shape {mask.shape}")
    out = np.where(mask.astype(bool), 255, 0).astype(np.uint8)
    if not cv2.imwrite(_ensure_parent(path), out):
        raise OSError(f"Could not write mask: {path}")


def save_depth(path: PathLike, depth: np.ndarray) -> Tuple[float, float]:
    """Write depth as a 16-bit PNG normalized to its range.

    The range is recorded in a ``<name>.json`` sidecar so the values can be
    recovered; returns ``(min, max)``.
    """
    depth = np.asarray(depth, dtype=np.float32)
    if depth.ndim != 2:
        raise ImageShapeError(f"Expected (H, W) depth, got shape {depth.shape}")
    if not np.all(np.isfinite(depth)):
        raise ImageShapeError("Depth contains non-finite values")
    lo, hi = float(depth.min()), float(depth.max())
    span = hi - lo
    scaled = np.zeros_like(depth) if span == 0 else (depth - lo) / span
    out = np.round(scaled * 65535.0).astype(np.uint16)
    if not cv2.imwrite(_ensure_parent(path), out):
        raise OSError(f"Could not write depth image: {path}")
    sidecar = Path(path).with_suffix(".json")
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump({"min": lo, "max": hi}, f)
    return lo, hi


def load_depth(path: PathLike) -> np.ndarray:
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise OSError(f"Could not read depth image: {path}")
    with open(Path(path).with_suffix(".json"), "r", encoding="utf-8") as f:
        meta = json.load(f)
    return meta["min"] + data.astype(np.float32) / 65535.0 * (meta["max"] - meta["min"])
