"""Snake-ordered flattening of feature maps, its inverse, fusion and
sinusoidal position enhancement.

Direction ``"horizontal"`` walks rows (even rows left to right, odd rows right
to left); ``"vertical"`` applies the same rule to columns.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import functional as F
from .tensor import Tensor

DIRECTIONS = ("horizontal", "vertical")


@lru_cache(maxsize=None)
def snake_order(H: int, W: int, direction: str) -> np.ndarray:
    """Row-major source index of each sequence position (read-only array)."""
    if H < 1 or W < 1:
        raise ValueError(f"snake_order: empty map {(H, W)}")
    grid = np.arange(H * W).reshape(H, W)
    if direction == "horizontal":
        lines = grid.copy()
    elif direction == "vertical":
        lines = grid.T.copy()
    else:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    lines[1::2] = lines[1::2, ::-1]
    order = lines.reshape(-1)
    order.setflags(write=False)
    return order


def naive_order(H: int, W: int) -> np.ndarray:
    return np.arange(H * W)


@dataclass
class SnakeSequence:
    """Pixel sequence (batch, H*W, C) together with what is needed to invert it."""

    values: Tensor
    direction: str
    origin_shape: tuple[int, int]

    def __len__(self) -> int:
        return self.values.shape[1]


def snake_flatten(x: Tensor, direction: str) -> SnakeSequence:
    """(B, C, H, W) feature map -> snake sequence of shape (B, H*W, C)."""
    if x.ndim != 4:
        raise ValueError(f"snake_flatten: expected (B, C, H, W), got {x.shape}")
    B, C, H, W = x.shape
    if H < 1 or W < 1 or B < 1 or C < 1:
        raise ValueError(f"snake_flatten: empty map {x.shape}")
    order = snake_order(H, W, direction)
    seq = F.permute_axis(F.reshape(x, (B, C, H * W)), order, axis=2)
    return SnakeSequence(F.transpose(seq, (0, 2, 1)), direction, (H, W))


def snake_unflatten(s: SnakeSequence) -> Tensor:
    """Exact inverse of :func:`snake_flatten`."""
    H, W = s.origin_shape
    B, L, C = s.values.shape
    if L != H * W:
        raise ValueError(f"snake_unflatten: sequence length {L} does not match shape {(H, W)}")
    order = snake_order(H, W, s.direction)
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    flat = F.permute_axis(F.transpose(s.values, (0, 2, 1)), inv, axis=2)
    return F.reshape(flat, (B, C, H, W))


@lru_cache(maxsize=64)
def _pe_table(length: int, width: int) -> np.ndarray:
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(0, width, 2, dtype=np.float64)
    freq = np.exp(-np.log(10000.0) * i / width)
    table = np.zeros((length, width))
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq[: width // 2])
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class PositionalEmbedding:
    """Transformer-style sinusoidal table: sine on even, cosine on odd channels."""

    length: int
    width: int

    @property
    def table(self) -> np.ndarray:
        return _pe_table(self.length, self.width)


def pe_apply(s: SnakeSequence, pe: PositionalEmbedding) -> SnakeSequence:
    B, L, C = s.values.shape
    if pe.width != C:
        raise ValueError(f"pe_apply: embedding width {pe.width} does not match sequence width {C}")
    if pe.length < L:
        raise ValueError(f"pe_apply: table length {pe.length} shorter than sequence length {L}")
    return SnakeSequence(F.add(s.values, Tensor(pe.table[:L][None])), s.direction, s.origin_shape)


def sbdm_fuse(y_h: Tensor, y_v: Tensor) -> Tensor:
    if y_h.shape != y_v.shape:
        raise ValueError(f"sbdm_fuse: shape mismatch {y_h.shape} vs {y_v.shape}")
    return F.add(y_h, y_v)
