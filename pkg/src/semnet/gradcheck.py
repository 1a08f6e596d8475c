"""Central-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad


@dataclass
class GradcheckReport:
    passed: bool
    worst_error: float
    worst_input: int
    worst_coord: tuple[int, ...]
    checked: int

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"gradcheck {status}: worst relative error {self.worst_error:.3e} "
                f"at input {self.worst_input} coord {self.worst_coord} ({self.checked} coords)")


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    step: float = 1e-5,
    tolerance: float = 1e-4,
    seed: int = 0,
    max_coords: int | None = None,
    floor: float = 1e-3,
) -> GradcheckReport:
    """Compare analytic gradients of ``fn(*inputs)`` with central differences.

    The output is reduced to a scalar by a fixed random projection, so every
    output coordinate contributes.  The relative error of one coordinate is
    ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.  With
    ``max_coords`` only that many seeded coordinates per input are probed.
    """
    rng = np.random.default_rng(seed)
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    out = fn(*inputs)
    proj = rng.standard_normal(out.shape)

    def scalar() -> float:
        with no_grad():
            val = fn(*inputs).data
        if not np.all(np.isfinite(val)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(val))[0])
            raise FloatingPointError(f"non-finite output at coordinate {bad}")
        return float(np.sum(val * proj))

    (out * Tensor(proj)).sum().backward()

    worst = (0.0, 0, ())
    checked = 0
    for k, t in enumerate(inputs):
        analytic = np.zeros(t.shape) if t.grad is None else t.grad
        if not np.all(np.isfinite(analytic)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(analytic))[0])
            raise FloatingPointError(f"non-finite analytic gradient at input {k} coordinate {bad}")
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for c in coords:
            orig = flat[c]
            flat[c] = orig + step
            fp = scalar()
            flat[c] = orig - step
            fm = scalar()
            flat[c] = orig
            numeric = (fp - fm) / (2.0 * step)
            a = analytic.reshape(-1)[c]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            checked += 1
            if err > worst[0]:
                worst = (err, k, tuple(int(i) for i in np.unravel_index(c, t.shape)))
    return GradcheckReport(worst[0] <= tolerance, worst[0], worst[1], worst[2], checked)
