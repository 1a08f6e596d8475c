"""Seeded irregular masks with a guaranteed hole-coverage band.

Masks follow the convention 1 = known pixel, 0 = hole.  Holes are grown one
brush dab or rectangle at a time; a piece that would push coverage above the
band is shrunk until it fits, so an attempt only fails when even a single
pixel overshoots.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("rectangles", "random-walk-strokes")


@dataclass(frozen=True)
class MaskSpec:
    kind: str = "random-walk-strokes"
    coverage_band: tuple[float, float] = (0.2, 0.4)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.coverage_band
        if not 0.0 < lo < hi < 1.0:
            raise ValueError(f"coverage band must satisfy 0 < low < high < 1, got {self.coverage_band}")
        if self.kind not in KINDS:
            raise ValueError(f"mask kind must be one of {KINDS}, got {self.kind!r}")


class MaskGenerationError(ValueError):
    pass


def coverage(mask: np.ndarray) -> float:
    """Fraction of hole (zero) pixels."""
    return float(np.mean(mask == 0))


def _disk(r: int) -> np.ndarray:
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return yy * yy + xx * xx <= r * r


def _stamp(hole: np.ndarray, cy: int, cx: int, stencil: np.ndarray):
    H, W = hole.shape
    r = stencil.shape[0] // 2
    y0, y1 = max(cy - r, 0), min(cy + r + 1, H)
    x0, x1 = max(cx - r, 0), min(cx + r + 1, W)
    st = stencil[y0 - (cy - r):y1 - (cy - r), x0 - (cx - r):x1 - (cx - r)]
    region = (slice(y0, y1), slice(x0, x1))
    return region, st & ~hole[region]


def _attempt(spec: MaskSpec, H: int, W: int, rng: np.random.Generator) -> np.ndarray | None:
    lo, hi = spec.coverage_band
    total = H * W
    hole = np.zeros((H, W), dtype=bool)
    count = 0
    budget = 50 * total + 1000
    if spec.kind == "rectangles":
        while count / total < lo and budget > 0:
            budget -= 1
            h = int(rng.integers(1, max(1, H // 2) + 1))
            w = int(rng.integers(1, max(1, W // 2) + 1))
            y = int(rng.integers(0, H - h + 1))
            x = int(rng.integers(0, W - w + 1))
            while True:
                new = ~hole[y:y + h, x:x + w]
                added = int(new.sum())
                if (count + added) / total <= hi:
                    break
                if h == 1 and w == 1:
                    return None
                if h >= w:
                    h = (h + 1) // 2 if h > 1 else 1
                else:
                    w = (w + 1) // 2 if w > 1 else 1
            hole[y:y + h, x:x + w] = True
            count += added
    else:
        r_max = max(1, min(H, W) // 8)
        y, x = int(rng.integers(0, H)), int(rng.integers(0, W))
        dabs_left = 0
        while count / total < lo and budget > 0:
            budget -= 1
            if dabs_left == 0:
                y, x = int(rng.integers(0, H)), int(rng.integers(0, W))
                dabs_left = int(rng.integers(4, 20))
                r = int(rng.integers(0, r_max + 1))
                angle = rng.uniform(0, 2 * np.pi)
            angle += rng.normal(0.0, 0.6)
            step = max(1, r)
            y = int(np.clip(round(y + step * np.sin(angle)), 0, H - 1))
            x = int(np.clip(round(x + step * np.cos(angle)), 0, W - 1))
            dabs_left -= 1
            rr = r
            while True:
                region, new = _stamp(hole, y, x, _disk(rr))
                added = int(new.sum())
                if (count + added) / total <= hi:
                    break
                if rr == 0:
                    return None
                rr -= 1
            hole[region] |= new
            count += added
    if not lo <= count / total <= hi:
        return None
    return (~hole).astype(np.float64)


def generate_mask(spec: MaskSpec, H: int, W: int, max_retries: int = 20) -> np.ndarray:
    """Binary (H, W) mask, 1 = known, whose hole fraction lies in the band."""
    if H < 1 or W < 1:
        raise ValueError(f"mask size must be positive, got {(H, W)}")
    rng = np.random.default_rng(spec.seed)
    for _ in range(max_retries):
        mask = _attempt(spec, H, W, rng)
        if mask is not None:
            return mask
    raise MaskGenerationError(
        f"could not reach coverage band {spec.coverage_band} on a {H}x{W} mask after {max_retries} tries")
