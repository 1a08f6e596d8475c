"""Whole-image inference with padding or naive non-overlapping tiles."""
from __future__ import annotations

import numpy as np

from .blocks import SemNet
from .train import inpaint_array


def _pad_to(a: np.ndarray, H: int, W: int) -> np.ndarray:
    h, w = a.shape[1:]
    return np.pad(a, ((0, 0), (0, H - h), (0, W - w)), mode="edge")


def _run_padded(model: SemNet, image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    d = model.config.divisor
    h, w = image.shape[1:]
    H, W = -(-h // d) * d, -(-w // d) * d
    if (H, W) == (h, w):
        return inpaint_array(model, image, mask)
    out = inpaint_array(model, _pad_to(image, H, W), _pad_to(mask, H, W))
    return out[:, :h, :w]


def inpaint_image(model: SemNet, image: np.ndarray, mask: np.ndarray, tile: int | None = None) -> np.ndarray:
    """Composited output for a (3, H, W) image and (1, H, W) mask of any size.

    Without ``tile`` the image is edge-padded up to the network's size
    divisor.  With ``tile`` it is cut into ``tile x tile`` pieces processed
    independently (no overlap, no blending).
    """
    if image.shape[1:] != mask.shape[1:]:
        raise ValueError(f"image {image.shape} and mask {mask.shape} sizes differ")
    if tile is None:
        return _run_padded(model, image, mask)
    if tile < 1:
        raise ValueError("tile must be positive")
    h, w = image.shape[1:]
    out = np.empty_like(image)
    for y in range(0, h, tile):
        for x in range(0, w, tile):
            sl = (slice(None), slice(y, min(y + tile, h)), slice(x, min(x + tile, w)))
            out[sl] = _run_padded(model, image[sl], mask[sl])
    return out
