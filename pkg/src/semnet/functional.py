"""Differentiable operations over :class:`~semnet.tensor.Tensor`.

Each op computes its forward value with numpy and registers a closure that
maps the output gradient to one gradient per parent.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import erf, expit

from .tensor import Tensor, as_tensor, make_node

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return make_node(a.data + b.data, (a, b),
                     lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return make_node(a.data - b.data, (a, b),
                     lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return make_node(ad * bd, (a, b),
                     lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    out = ad / bd
    return make_node(out, (a, b),
                     lambda g: (_unbroadcast(g / bd, ad.shape),
                                _unbroadcast(-g * out / bd, bd.shape)))


def abs(x: Tensor) -> Tensor:  # noqa: A001
    xd = x.data
    return make_node(np.abs(xd), (x,), lambda g: (g * np.sign(xd),))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return make_node(out, (x,), lambda g: (g * out,))


def sum(x: Tensor) -> Tensor:  # noqa: A001
    shape = x.shape
    return make_node(np.array(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),))


def mean(x: Tensor) -> Tensor:
    shape, n = x.shape, x.size
    return make_node(np.array(x.data.mean()), (x,), lambda g: (np.full(shape, float(g) / n),))


# ---------------------------------------------------------------------------
# layout


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    old = x.shape
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return make_node(np.ascontiguousarray(x.data.transpose(axes)), (x,),
                     lambda g: (g.transpose(inv),))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(tensors)))

    return make_node(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Slice ``length`` entries along ``axis`` starting at ``start``."""
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    shape = x.shape

    def bw(g):
        full = np.zeros(shape)
        full[idx] = g
        return (full,)

    return make_node(x.data[idx], (x,), bw)


def permute_axis(x: Tensor, perm: np.ndarray, axis: int) -> Tensor:
    """Reorder entries along ``axis``: ``out[..., k, ...] = x[..., perm[k], ...]``.

    ``perm`` must be a permutation; the gradient scatters back through it.
    """
    perm = np.asarray(perm, dtype=np.intp)
    if perm.shape != (x.shape[axis],) or not np.array_equal(np.sort(perm), np.arange(perm.size)):
        raise ValueError(f"perm is not a permutation of axis {axis} with size {x.shape[axis]}")
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return make_node(np.take(x.data, perm, axis=axis), (x,),
                     lambda g: (np.take(g, inv, axis=axis),))


# ---------------------------------------------------------------------------
# dense layers


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the last axis; ``weight`` has shape (out, in)."""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise ValueError(f"linear: input shape {x.shape} does not match weight shape {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    if bias is not None:
        out = out + bias.data

    def bw(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = g @ wd
        gw = g2.T @ xd.reshape(-1, xd.shape[-1])
        gb = g2.sum(axis=0) if bias is not None else None
        return (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_node(out, parents, bw)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, depthwise: bool = False) -> Tensor:
    """Stride-1 2-D convolution with zero "same" padding.

    ``weight`` is (out, in, k, k) for a dense conv or (C, 1, k, k) when
    ``depthwise``; k must be odd.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d: expected 4-D input and weight, got {x.shape} and {weight.shape}")
    B, C, H, W = x.shape
    O, Ci, k, k2 = weight.shape
    if k != k2 or k % 2 == 0:
        raise ValueError(f"conv2d: kernel must be square and odd, weight shape {weight.shape}")
    if depthwise:
        if Ci != 1 or O != C:
            raise ValueError(f"conv2d: depthwise weight shape {weight.shape} does not match input shape {x.shape}")
    elif Ci != C:
        raise ValueError(f"conv2d: weight shape {weight.shape} does not match input shape {x.shape}")
    if bias is not None and bias.shape != (O,):
        raise ValueError(f"conv2d: bias shape {bias.shape} does not match weight shape {weight.shape}")

    p = k // 2
    xd, wd = x.data, weight.data
    xp = np.pad(xd, ((0, 0), (0, 0), (p, p), (p, p))) if p else xd
    shifts = [(i, j) for i in range(k) for j in range(k)]

    if depthwise:
        w2 = wd.reshape(C, k * k)
        out = np.zeros((B, C, H, W))
        for s, (i, j) in enumerate(shifts):
            out += w2[:, s][None, :, None, None] * xp[:, :, i:i + H, j:j + W]
    else:
        if k == 1:
            cols = xd.reshape(B, C, H * W)
        else:
            cols = np.stack([xp[:, :, i:i + H, j:j + W] for i, j in shifts], axis=2)
            cols = cols.reshape(B, C * k * k, H * W)
        w2 = wd.reshape(O, C * k * k)
        out = np.matmul(w2, cols).reshape(B, O, H, W)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def bw(g):
        gb = g.sum(axis=(0, 2, 3)) if bias is not None else None
        if depthwise:
            gxp = np.zeros_like(xp)
            gw = np.zeros((C, k * k))
            for s, (i, j) in enumerate(shifts):
                win = xp[:, :, i:i + H, j:j + W]
                gw[:, s] = (g * win).sum(axis=(0, 2, 3))
                gxp[:, :, i:i + H, j:j + W] += w2[:, s][None, :, None, None] * g
        else:
            g2 = g.reshape(B, O, H * W)
            gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0)
            gcols = np.matmul(w2.T, g2)
            if k == 1:
                return (gcols.reshape(B, C, H, W), gw.reshape(wd.shape), gb)
            gcols = gcols.reshape(B, C, k * k, H, W)
            gxp = np.zeros_like(xp)
            for s, (i, j) in enumerate(shifts):
                gxp[:, :, i:i + H, j:j + W] += gcols[:, :, s]
        gx = gxp[:, :, p:p + H, p:p + W] if p else gxp
        return (gx, gw.reshape(wd.shape), gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_node(out, parents, bw)


def causal_conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Depthwise causal convolution along the length axis of a (B, L, E) sequence.

    ``weight`` is (E, K); output step t sees inputs t-K+1 .. t.
    """
    B, L, E = x.shape
    if weight.ndim != 2 or weight.shape[0] != E:
        raise ValueError(f"causal_conv1d: weight shape {weight.shape} does not match input shape {x.shape}")
    K = weight.shape[1]
    xd, wd = x.data, weight.data
    xp = np.pad(xd, ((0, 0), (K - 1, 0), (0, 0)))
    out = np.zeros((B, L, E))
    for k in range(K):
        out += wd[:, k] * xp[:, k:k + L, :]
    if bias is not None:
        out = out + bias.data

    def bw(g):
        gxp = np.zeros_like(xp)
        gw = np.zeros((E, K))
        for k in range(K):
            gw[:, k] = (g * xp[:, k:k + L, :]).sum(axis=(0, 1))
            gxp[:, k:k + L, :] += wd[:, k] * g
        gb = g.sum(axis=(0, 1)) if bias is not None else None
        return (gxp[:, K - 1:, :], gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_node(out, parents, bw)


def layer_norm(x: Tensor, gain: Tensor, offset: Tensor, axis: int = 1, eps: float = 1e-6) -> Tensor:
    """Normalize the channel vector at every position, then apply gain/offset."""
    if eps <= 0:
        raise ValueError("layer_norm: eps must be positive")
    axis = axis % x.ndim
    C = x.shape[axis]
    if gain.shape != (C,) or offset.shape != (C,):
        raise ValueError(f"layer_norm: parameter shapes {gain.shape}/{offset.shape} do not match input shape {x.shape}")
    bshape = [1] * x.ndim
    bshape[axis] = C
    gd = gain.data.reshape(bshape)
    xd = x.data
    mu = xd.mean(axis=axis, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gd + offset.data.reshape(bshape)
    red = tuple(a for a in range(x.ndim) if a != axis)

    def bw(g):
        dxhat = g * gd
        m1 = dxhat.mean(axis=axis, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=axis, keepdims=True)
        gx = inv * (dxhat - m1 - xhat * m2)
        return (gx, (g * xhat).sum(axis=red), g.sum(axis=red))

    return make_node(out, (x, gain, offset), bw)


# ---------------------------------------------------------------------------
# activations


def relu(x: Tensor) -> Tensor:
    xd = x.data
    return make_node(np.maximum(xd, 0.0), (x,), lambda g: (g * (xd > 0),))


def gelu(x: Tensor) -> Tensor:
    """Exact (erf) GELU."""
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * xd * xd)
    return make_node(xd * cdf, (x,), lambda g: (g * (cdf + xd * pdf),))


def silu(x: Tensor) -> Tensor:
    xd = x.data
    s = expit(xd)
    return make_node(xd * s, (x,), lambda g: (g * s * (1.0 + xd * (1.0 - s)),))


def softplus(x: Tensor) -> Tensor:
    xd = x.data
    return make_node(np.logaddexp(0.0, xd), (x,), lambda g: (g * expit(xd),))


_ACTIVATIONS = {"relu": relu, "gelu": gelu, "silu": silu, "softplus": softplus}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; expected one of {sorted(_ACTIVATIONS)}") from None
    return fn(x)


# ---------------------------------------------------------------------------
# resampling


def _unshuffle(a: np.ndarray, r: int) -> np.ndarray:
    B, C, H, W = a.shape
    a = a.reshape(B, C, H // r, r, W // r, r).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(a).reshape(B, C * r * r, H // r, W // r)


def _shuffle(a: np.ndarray, r: int) -> np.ndarray:
    B, C, H, W = a.shape
    a = a.reshape(B, C // (r * r), r, r, H, W).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(a).reshape(B, C // (r * r), H * r, W * r)


def pixel_unshuffle(x: Tensor, factor: int = 2) -> Tensor:
    """(B, C, H, W) -> (B, C*f*f, H/f, W/f), lossless."""
    _, _, H, W = x.shape
    if H % factor or W % factor:
        raise ValueError(f"pixel_unshuffle: spatial size {(H, W)} not divisible by {factor}")
    return make_node(_unshuffle(x.data, factor), (x,), lambda g: (_shuffle(g, factor),))


def pixel_shuffle(x: Tensor, factor: int = 2) -> Tensor:
    """(B, C*f*f, H, W) -> (B, C, H*f, W*f), inverse of :func:`pixel_unshuffle`."""
    if x.shape[1] % (factor * factor):
        raise ValueError(f"pixel_shuffle: channel count {x.shape[1]} not divisible by {factor * factor}")
    return make_node(_shuffle(x.data, factor), (x,), lambda g: (_unshuffle(g, factor),))


def pixel_shuffle_pair(x: Tensor, factor: int = 2, direction: str = "unshuffle") -> Tensor:
    if direction == "unshuffle":
        return pixel_unshuffle(x, factor)
    if direction == "shuffle":
        return pixel_shuffle(x, factor)
    raise ValueError(f"direction must be 'shuffle' or 'unshuffle', got {direction!r}")


def avg_pool2d(x: Tensor, factor: int) -> Tensor:
    B, C, H, W = x.shape
    if H % factor or W % factor:
        raise ValueError(f"avg_pool2d: spatial size {(H, W)} not divisible by {factor}")
    if factor == 1:
        return x
    f2 = float(factor * factor)
    out = x.data.reshape(B, C, H // factor, factor, W // factor, factor).mean(axis=(3, 5))

    def bw(g):
        return (np.repeat(np.repeat(g, factor, axis=2), factor, axis=3) / f2,)

    return make_node(out, (x,), bw)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    if factor == 1:
        return x
    B, C, H, W = x.shape
    out = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def bw(g):
        return (g.reshape(B, C, H, factor, W, factor).sum(axis=(3, 5)),)

    return make_node(out, (x,), bw)


def pool_and_upsample(x: Tensor, factor: int, mode: str) -> Tensor:
    if mode == "average-pool":
        return avg_pool2d(x, factor)
    if mode == "nearest-upsample":
        return upsample_nearest(x, factor)
    raise ValueError(f"mode must be 'average-pool' or 'nearest-upsample', got {mode!r}")
