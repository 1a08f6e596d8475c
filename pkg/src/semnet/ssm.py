"""Selective state-space recurrence and the Mamba block.

The continuous system ``h' = A h + B x, y = C h`` is discretized with a
zero-order hold per step, giving the linear recurrence
``h_t = Abar_t h_{t-1} + Bbar_t x_t``.  ``A`` is diagonal, so each
(channel, state) pair is an independent scalar recurrence.
"""
from __future__ import annotations

import math

import numpy as np

from . import functional as F
from . import kernels
from ._scan_py import SERIES_THRESHOLD, zoh_terms
from .nn import Linear, Module, uniform_fan_in, ones_param, zeros_param
from .tensor import Tensor, is_grad_enabled, make_node

__all__ = [
    "zoh_discretize", "linear_scan_sequential", "linear_scan_blocked", "selective_scan",
    "SsmParams", "selective_scan_seq", "selective_scan_parallel", "MambaBlock",
]


def _zoh_exact(A, B, delta):
    z = delta * A
    return np.exp(z), np.expm1(z) / A * B


def _zoh_series(A, B, delta):
    z = delta * A
    return np.exp(z), delta * B * (1.0 + z * (0.5 + z / 6.0))


def zoh_discretize(A, B, delta):
    """Discretize diagonal ``A`` and input vector ``B`` with step ``delta``.

    Returns ``(Abar, Bbar)`` with ``Abar = exp(delta*A)`` and
    ``Bbar = (delta*A)^-1 (exp(delta*A) - 1) delta*B``.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta <= 0):
        raise ValueError("zoh_discretize: delta must be strictly positive")
    abar, g, _, _ = zoh_terms(delta, A)
    return abar, g * B


# ---------------------------------------------------------------------------
# raw linear recurrences h_t = a_t h_{t-1} + b_t


def linear_scan_sequential(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Scan along axis 0 with the active kernel backend."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    shape = b.shape
    L = shape[0]
    out = kernels.linear_scan(np.ascontiguousarray(a.reshape(L, -1)),
                              np.ascontiguousarray(b.reshape(L, -1)))
    return out.reshape(shape)


def _hillis_steele(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive log-depth scan along axis 1 under (a1,b1)*(a2,b2) = (a2 a1, a2 b1 + b2)."""
    a = a.copy()
    b = b.copy()
    n = a.shape[1]
    offset = 1
    while offset < n:
        a_prev = a[:, :-offset]
        b_prev = b[:, :-offset]
        b[:, offset:] = a[:, offset:] * b_prev + b[:, offset:]
        a[:, offset:] = a[:, offset:] * a_prev
        offset *= 2
    return a, b


def linear_scan_blocked(a: np.ndarray, b: np.ndarray, block: int) -> np.ndarray:
    """Blocked prefix scan along axis 0, equal to the sequential recurrence.

    Each chunk of ``block`` steps is scanned in log-depth; chunk totals are then
    scanned the same way and folded back in as carries.
    """
    if block < 1:
        raise ValueError("block must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    L = a.shape[0]
    if L == 0:
        raise ValueError("cannot scan an empty sequence")
    rest = a.shape[1:]
    block = min(block, L)
    nchunks = -(-L // block)
    pad = nchunks * block - L
    if pad:
        a = np.concatenate([a, np.ones((pad,) + rest)])
        b = np.concatenate([b, np.zeros((pad,) + rest)])
    a_loc, b_loc = _hillis_steele(a.reshape((nchunks, block) + rest),
                                  b.reshape((nchunks, block) + rest))
    if nchunks > 1:
        _, ends = _hillis_steele(a_loc[None, :, -1], b_loc[None, :, -1])
        carry = np.concatenate([np.zeros((1,) + rest), ends[0, :-1]])
        b_loc = a_loc * carry[:, None] + b_loc
    return b_loc.reshape((nchunks * block,) + rest)[:L]


# ---------------------------------------------------------------------------
# fused selective scan (differentiable)


def _parallel_forward(x, delta, A, B, C, D, block):
    abar, g, _, _ = zoh_terms(delta[..., None], A[None, None])
    u = g * B[:, :, None, :] * x[..., None]
    h = np.moveaxis(linear_scan_blocked(np.moveaxis(abar, 1, 0), np.moveaxis(u, 1, 0), block), 0, 1)
    h = np.ascontiguousarray(h)
    y = np.einsum("blen,bln->ble", h, C) + D * x
    return y, h


def selective_scan(x: Tensor, delta: Tensor, A: Tensor, B: Tensor, C: Tensor, D: Tensor,
                   impl: str = "sequential", block: int | None = None) -> Tensor:
    """Input-dependent SSM scan ``y_t = C_t h_t + D x_t``.

    x, delta: (batch, L, E); A: (E, N) continuous diagonal; B, C: (batch, L, N);
    D: (E,).  ``impl`` is ``"sequential"`` (kernel backend) or ``"parallel"``
    (blocked associative scan, ``block`` steps per chunk).  Both share the
    reverse-recurrence backward kernel.
    """
    if x.ndim != 3:
        raise ValueError(f"selective_scan: expected (batch, L, E) input, got {x.shape}")
    Bt, L, E = x.shape
    if L == 0:
        raise ValueError("selective_scan: empty sequence")
    N = A.shape[1] if A.ndim == 2 else -1
    if (delta.shape != x.shape or A.shape != (E, N) or B.shape != (Bt, L, N)
            or C.shape != (Bt, L, N) or D.shape != (E,)):
        raise ValueError(
            f"selective_scan: inconsistent shapes x={x.shape} delta={delta.shape} A={A.shape} "
            f"B={B.shape} C={C.shape} D={D.shape}")
    if np.any(delta.data <= 0):
        raise ValueError("selective_scan: delta must be strictly positive")
    args = [np.ascontiguousarray(t.data) for t in (x, delta, A, B, C, D)]
    needs_grad = is_grad_enabled() and any(t.requires_grad for t in (x, delta, A, B, C, D))
    if impl == "sequential" and not needs_grad:
        return Tensor(kernels.ssm_scan(*args))
    if impl == "sequential":
        y, h = kernels.ssm_forward(*args)
    elif impl == "parallel":
        y, h = _parallel_forward(*args, block=L if block is None else block)
    else:
        raise ValueError(f"impl must be 'sequential' or 'parallel', got {impl!r}")

    def bw(g):
        return kernels.ssm_backward(np.ascontiguousarray(g), *args, h)

    return make_node(y, (x, delta, A, B, C, D), bw)


# ---------------------------------------------------------------------------
# modules


def _inverse_softplus(y: np.ndarray) -> np.ndarray:
    return y + np.log(-np.expm1(-y))


class SsmParams(Module):
    """Selective SSM parameters for ``channels`` independent input channels.

    ``A = -exp(a_log)`` stays strictly negative; it starts at -(1, 2, ..., N)
    for every channel.  Step sizes come from a per-channel projection passed
    through softplus, with biases set so the initial steps lie in [0.01, 0.1].
    """

    def __init__(self, rng: np.random.Generator, channels: int, state: int = 16,
                 dt_min: float = 0.01, dt_max: float = 0.1):
        self.channels = channels
        self.state = state
        self.a_log = Tensor(np.log(np.tile(np.arange(1, state + 1, dtype=np.float64), (channels, 1))),
                            requires_grad=True)
        self.delta_proj = Linear(rng, channels, channels)
        dt = np.exp(rng.uniform(math.log(dt_min), math.log(dt_max), size=channels))
        self.delta_proj.bias.data[:] = _inverse_softplus(dt)
        self.b_proj = Linear(rng, channels, state, bias=False)
        self.c_proj = Linear(rng, channels, state, bias=False)
        self.skip_d = ones_param(channels)

    def A(self) -> Tensor:
        return F.mul(F.exp(self.a_log), -1.0)

    def forward(self, x: Tensor, impl: str = "sequential", block: int | None = None) -> Tensor:
        if x.ndim != 3 or x.shape[-1] != self.channels:
            raise ValueError(f"SsmParams: expected (batch, L, {self.channels}) input, got {x.shape}")
        delta = F.softplus(self.delta_proj(x))
        return selective_scan(x, delta, self.A(), self.b_proj(x), self.c_proj(x), self.skip_d,
                              impl=impl, block=block)


def selective_scan_seq(x: Tensor, params: SsmParams) -> Tensor:
    return params(x, impl="sequential")


def selective_scan_parallel(x: Tensor, params: SsmParams, block: int) -> Tensor:
    return params(x, impl="parallel", block=block)


class MambaBlock(Module):
    """Gated selective-SSM block over (batch, L, width) sequences.

    Input projection to ``expansion * width`` on two branches; the main branch
    runs a causal depthwise conv (width 4), silu and the selective scan, the
    other branch is a silu gate.  Their product is projected back to ``width``.
    """

    def __init__(self, rng: np.random.Generator, width: int, expansion: int = 2,
                 state: int = 16, conv_width: int = 4):
        self.width = width
        self.inner = expansion * width
        self.in_proj = Linear(rng, width, 2 * self.inner, bias=False)
        self.conv_weight = uniform_fan_in(rng, (self.inner, conv_width), conv_width)
        self.conv_bias = zeros_param(self.inner)
        self.ssm = SsmParams(rng, self.inner, state)
        self.out_proj = Linear(rng, self.inner, width)

    def forward(self, x: Tensor, impl: str = "sequential", block: int | None = None) -> Tensor:
        if x.ndim != 3 or x.shape[-1] != self.width:
            raise ValueError(f"MambaBlock: expected (batch, L, {self.width}) input, got {x.shape}")
        xz = self.in_proj(x)
        u = F.narrow(xz, 2, 0, self.inner)
        z = F.narrow(xz, 2, self.inner, self.inner)
        u = F.silu(F.causal_conv1d(u, self.conv_weight, self.conv_bias))
        y = self.ssm(u, impl=impl, block=block)
        return self.out_proj(F.mul(y, F.silu(z)))


def mamba_block(x: Tensor, block: MambaBlock) -> Tensor:
    return block(x)
