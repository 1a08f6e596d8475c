"""Slow reference evaluations used as independent checks.

Everything here is written with explicit Python loops, on purpose sharing no
code with the vectorized implementations it checks.
"""
from __future__ import annotations

import math

import numpy as np


def recurrence(a, b) -> np.ndarray:
    """h_t = a_t h_{t-1} + b_t, h_{-1} = 0, scalar loop over every coordinate."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    L = a.shape[0]
    fa = a.reshape(L, -1)
    fb = b.reshape(L, -1)
    out = np.zeros_like(fb)
    for m in range(fa.shape[1]):
        h = 0.0
        for t in range(L):
            h = fa[t, m] * h + fb[t, m]
            out[t, m] = h
    return out.reshape(b.shape)


def psnr(pred, target, peak: float = 1.0) -> float:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    total = 0.0
    for u, v in zip(p.tolist(), t.tolist()):
        total += (u - v) ** 2
    mse = total / len(p)
    return math.inf if mse == 0 else 10.0 * math.log10(peak * peak / mse)


def ssim(pred, target, window: int = 11, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03) -> float:
    """Direct per-window SSIM with an outer-product Gaussian weight."""
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if x.ndim == 3:
        x = sum(x[c] for c in range(x.shape[0])) / x.shape[0]
        y = sum(y[c] for c in range(y.shape[0])) / y.shape[0]
    half = (window - 1) / 2.0
    g1 = [math.exp(-((i - half) ** 2) / (2 * sigma * sigma)) for i in range(window)]
    s = sum(g1)
    g1 = [v / s for v in g1]
    c1, c2 = k1 ** 2, k2 ** 2
    H, W = x.shape
    vals = []
    for i in range(H - window + 1):
        for j in range(W - window + 1):
            mx = my = sxx = syy = sxy = 0.0
            for u in range(window):
                for v in range(window):
                    w = g1[u] * g1[v]
                    a = x[i + u, j + v]
                    b = y[i + u, j + v]
                    mx += w * a
                    my += w * b
                    sxx += w * a * a
                    syy += w * b * b
                    sxy += w * a * b
            sxx -= mx * mx
            syy -= my * my
            sxy -= mx * my
            vals.append(((2 * mx * my + c1) * (2 * sxy + c2)) /
                        ((mx * mx + my * my + c1) * (sxx + syy + c2)))
    return sum(vals) / len(vals)


def manhattan_steps(order, W: int) -> list[int]:
    """Grid distance between consecutive row-major indices of ``order``."""
    out = []
    for p, q in zip(order[:-1], order[1:]):
        out.append(abs(p // W - q // W) + abs(p % W - q % W))
    return out
