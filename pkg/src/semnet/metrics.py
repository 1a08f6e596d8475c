"""Image quality metrics and the masked training loss."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import functional as F
from .tensor import Tensor


def masked_l1_loss(pred: Tensor, target, mask, w_hole: float = 6.0, w_valid: float = 1.0) -> Tensor:
    """Weight-normalized mean absolute error; holes (mask 0) weigh ``w_hole``.

    ``mask`` broadcasts against ``pred`` (e.g. (B, 1, H, W) against (B, 3, H, W)).
    """
    target = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    mask = mask.data if isinstance(mask, Tensor) else np.asarray(mask, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"masked_l1_loss: pred shape {pred.shape} does not match target shape {target.shape}")
    weight = np.broadcast_to(w_hole * (1.0 - mask) + w_valid * mask, pred.shape)
    norm = float(weight.sum())
    return F.sum(F.mul(F.abs(F.sub(pred, target)), weight / norm))


def psnr(pred, target, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are identical."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"psnr: shape mismatch {pred.shape} vs {target.shape}")
    mse = float(np.mean((pred - target) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def to_gray(img: np.ndarray) -> np.ndarray:
    """Channel mean of a (C, H, W) image; (H, W) passes through."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return img.mean(axis=0)
    if img.ndim == 2:
        return img
    raise ValueError(f"expected (C, H, W) or (H, W) image, got shape {img.shape}")


def _filter_valid(a: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = g.size
    a = sliding_window_view(a, k, axis=0) @ g
    return sliding_window_view(a, k, axis=1) @ g


def ssim(pred, target, window: int = 11, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03,
         data_range: float = 1.0) -> float:
    """Mean SSIM over all fully-contained Gaussian windows of the grayscale images."""
    x = to_gray(pred)
    y = to_gray(target)
    if x.shape != y.shape:
        raise ValueError(f"ssim: shape mismatch {x.shape} vs {y.shape}")
    if min(x.shape) < window:
        raise ValueError(f"ssim: image {x.shape} smaller than the {window}x{window} window")
    g = gaussian_window(window, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def l1_error(pred, target) -> float:
    """Mean absolute error scaled by 100."""
    return 100.0 * float(np.mean(np.abs(np.asarray(pred) - np.asarray(target))))
