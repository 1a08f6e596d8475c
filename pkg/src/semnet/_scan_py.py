"""Pure numpy selective-scan kernels (fallback for the compiled extension).

The time loop runs in Python; every step is vectorized over batch,
channel and state.
"""
from __future__ import annotations

import numpy as np

SERIES_THRESHOLD = 1e-4


def zoh_terms(delta: np.ndarray, A: np.ndarray):
    """Zero-order-hold factors for diagonal ``A``.

    Returns ``(abar, g, dg/ddelta, dg/dA)`` where ``abar = exp(delta*A)`` and
    ``g = (exp(delta*A) - 1) / A`` so that the discrete input matrix is ``g*B``.
    When ``|delta*A| < 1e-4`` the series ``delta*(1 + z/2 + z^2/6)`` replaces the
    quotient.
    """
    z = delta * A
    ez = np.exp(z)
    small = np.abs(z) < SERIES_THRESHOLD
    safe_a = np.where(small, 1.0, A)
    em1 = np.expm1(z)
    g = np.where(small, delta * (1.0 + z * (0.5 + z / 6.0)), em1 / safe_a)
    dg_ddelta = np.where(small, 1.0 + z * (1.0 + 0.5 * z), ez)
    dg_da = np.where(small, delta * delta * (0.5 + z / 3.0), (z * ez - em1) / (safe_a * safe_a))
    return ez, g, dg_ddelta, dg_da


def linear_scan(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    L = a.shape[0]
    h = np.empty_like(b)
    h[0] = b[0]
    for t in range(1, L):
        h[t] = a[t] * h[t - 1] + b[t]
    return h


def ssm_forward(x, delta, A, B, C, D):
    Bt, L, E = x.shape
    N = A.shape[1]
    h = np.empty((Bt, L, E, N))
    y = np.empty((Bt, L, E))
    state = np.zeros((Bt, E, N))
    for t in range(L):
        abar, g, _, _ = zoh_terms(delta[:, t, :, None], A[None])
        state = abar * state + g * B[:, t, None, :] * x[:, t, :, None]
        h[:, t] = state
        y[:, t] = np.einsum("ben,bn->be", state, C[:, t]) + D * x[:, t]
    return y, h


def ssm_scan(x, delta, A, B, C, D):
    """Forward-only scan without the per-step state history."""
    Bt, L, E = x.shape
    y = np.empty((Bt, L, E))
    state = np.zeros((Bt, E, A.shape[1]))
    for t in range(L):
        abar, g, _, _ = zoh_terms(delta[:, t, :, None], A[None])
        state = abar * state + g * B[:, t, None, :] * x[:, t, :, None]
        y[:, t] = np.einsum("ben,bn->be", state, C[:, t]) + D * x[:, t]
    return y


def ssm_backward(dy, x, delta, A, B, C, D, h):
    Bt, L, E = x.shape
    N = A.shape[1]
    dx = np.empty((Bt, L, E))
    ddelta = np.empty((Bt, L, E))
    dA = np.zeros((E, N))
    dB = np.zeros((Bt, L, N))
    dC = np.zeros((Bt, L, N))
    carry = np.zeros((Bt, E, N))
    for t in range(L - 1, -1, -1):
        dyt = dy[:, t, :, None]
        xt = x[:, t, :, None]
        Bt_ = B[:, t, None, :]
        dh = C[:, t, None, :] * dyt + carry
        hprev = h[:, t - 1] if t > 0 else np.zeros((Bt, E, N))
        abar, g, dgd, dga = zoh_terms(delta[:, t, :, None], A[None])
        da = dh * hprev
        dx[:, t] = (dh * g * Bt_).sum(axis=2) + D * dy[:, t]
        dB[:, t] = (dh * g * xt).sum(axis=1)
        dgv = dh * Bt_ * xt
        ddelta[:, t] = (da * abar * A + dgv * dgd).sum(axis=2)
        dA += (da * abar * delta[:, t, :, None] + dgv * dga).sum(axis=0)
        dC[:, t] = (dyt * h[:, t]).sum(axis=1)
        carry = abar * dh
    dD = (dy * x).sum(axis=(0, 1))
    return dx, ddelta, dA, dB, dC, dD
