"""Built-in invariant checks run by ``semnet selftest``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import functional as F
from . import oracles
from .bench import random_scan_inputs, relative_error
from .gradcheck import gradcheck
from .metrics import psnr, ssim
from .sbdm import SnakeSequence, snake_flatten, snake_order, snake_unflatten
from .ssm import _parallel_forward
from . import kernels
from .tensor import Tensor

FAULTS = ("snake_inverse",)


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    failures: list[str] = field(default_factory=list)

    def record(self, ok: bool, label: str) -> None:
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            self.failures.append(label)

    def line(self) -> str:
        status = "PASS" if self.failed == 0 else "FAIL"
        return f"{status} {self.name}: {self.passed} passed, {self.failed} failed"


def _gradcheck_suite(rng) -> SuiteResult:
    res = SuiteResult("gradcheck")

    def t(*shape):
        return Tensor(rng.standard_normal(shape))

    cases = {
        "conv2d_3x3": (lambda x, w, b: F.conv2d(x, w, b), [t(1, 2, 4, 4), t(3, 2, 3, 3), t(3)]),
        "conv2d_depthwise": (lambda x, w: F.conv2d(x, w, depthwise=True), [t(1, 2, 4, 4), t(2, 1, 3, 3)]),
        "layer_norm": (lambda x, g, o: F.layer_norm(x, g, o), [t(1, 3, 2, 2), t(3), t(3)]),
        "gelu": (F.gelu, [t(2, 3)]),
        "silu": (F.silu, [t(2, 3)]),
        "softplus": (F.softplus, [t(2, 3)]),
        "pixel_unshuffle": (F.pixel_unshuffle, [t(1, 1, 4, 4)]),
        "avg_pool": (lambda x: F.avg_pool2d(x, 2), [t(1, 2, 4, 4)]),
        "snake": (lambda x: snake_flatten(x, "vertical").values, [t(1, 2, 3, 4)]),
    }
    for name, (fn, inputs) in cases.items():
        rep = gradcheck(fn, inputs)
        res.record(rep.passed, f"{name}: {rep}")
    return res


def _scan_suite(rng) -> SuiteResult:
    res = SuiteResult("scan-equivalence")
    for i in range(20):
        L = int(rng.integers(1, 257))
        N = int(rng.choice([1, 4, 16]))
        args = random_scan_inputs(rng, L, N, channels=2)
        y_seq, _ = kernels.ssm_forward(*args)
        for block in (1, 2, 16, L):
            y_par, _ = _parallel_forward(*args, block=block)
            err = relative_error(y_par, y_seq)
            res.record(err <= 1e-10, f"instance {i} L={L} N={N} block={block}: {err:.2e}")
    return res


def _snake_suite(rng, fault: str | None) -> SuiteResult:
    res = SuiteResult("snake-roundtrip")
    for H in range(1, 9):
        for W in range(1, 9):
            x = Tensor(rng.standard_normal((1, 2, H, W)))
            for d in ("horizontal", "vertical"):
                s = snake_flatten(x, d)
                if fault == "snake_inverse":
                    # reads the sequence back as if it were row-major
                    back = F.reshape(F.transpose(s.values, (0, 2, 1)), (1, 2, H, W))
                else:
                    back = snake_unflatten(SnakeSequence(s.values, d, (H, W)))
                steps = oracles.manhattan_steps(snake_order(H, W, d).tolist(), W)
                ok = np.array_equal(back.data, x.data) and all(st == 1 for st in steps)
                res.record(ok, f"{d} {H}x{W}")
    return res


def _metric_suite(rng) -> SuiteResult:
    res = SuiteResult("metric-oracles")
    for i in range(5):
        a = rng.uniform(size=(3, 14, 14))
        b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
        res.record(abs(psnr(a, b) - oracles.psnr(a, b)) <= 1e-9, f"psnr pair {i}")
        res.record(abs(ssim(a, b) - oracles.ssim(a, b)) <= 1e-9, f"ssim pair {i}")
    return res


def run_selftest(seed: int = 0, fault: str | None = None) -> list[SuiteResult]:
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; known: {FAULTS}")
    rng = np.random.default_rng(seed)
    return [_gradcheck_suite(rng), _scan_suite(rng), _snake_suite(rng, fault), _metric_suite(rng)]
