"""Selective-scan timing: sequential kernel(s) against the blocked parallel scan."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .ssm import _parallel_forward

CSV_HEADER = ("L", "N", "block", "impl", "ns_per_elem")
EQUIVALENCE_TOL = 1e-10


class EquivalenceError(RuntimeError):
    pass


@dataclass
class BenchRow:
    L: int
    N: int
    block: int
    impl: str
    ns_per_elem: float


def random_scan_inputs(rng: np.random.Generator, L: int, N: int, channels: int = 1, batch: int = 1):
    x = rng.standard_normal((batch, L, channels))
    delta = rng.uniform(0.001, 0.1, size=(batch, L, channels))
    A = -np.tile(np.arange(1, N + 1, dtype=np.float64), (channels, 1)) * rng.uniform(0.5, 1.5, (channels, 1))
    B = rng.standard_normal((batch, L, N))
    C = rng.standard_normal((batch, L, N))
    D = rng.standard_normal(channels)
    return x, delta, A, B, C, D


def relative_error(candidate: np.ndarray, reference: np.ndarray) -> float:
    """Max-norm error relative to the max-norm of the reference."""
    scale = float(np.max(np.abs(reference))) or 1.0
    return float(np.max(np.abs(candidate - reference))) / scale


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_bench(lengths: Sequence[int], states: Sequence[int], blocks: Sequence[int], repeats: int = 3,
              seed: int = 0, include_python: bool = True, corrupt: bool = False) -> list[BenchRow]:
    """Time each configuration after checking parallel == sequential within 1e-10.

    Sequential rows report ``block = 0``.  ``corrupt`` perturbs the parallel
    result to exercise the equivalence gate.  Times are best-of-``repeats``.
    """
    rng = np.random.default_rng(seed)
    rows: list[BenchRow] = []
    seq_impls = [("sequential", kernels.ssm_scan)]
    if include_python and kernels.compiled_backend is not None:
        seq_impls.append(("sequential_py", kernels.python_backend.ssm_scan))
    for L in lengths:
        for N in states:
            args = random_scan_inputs(rng, L, N)
            y_ref = kernels.ssm_scan(*args)
            elems = L * N
            for block in blocks:
                y_par, _ = _parallel_forward(*args, block=block)
                if corrupt:
                    y_par = y_par + 1e-6 * (np.max(np.abs(y_ref)) or 1.0)
                err = relative_error(y_par, y_ref)
                if not err <= EQUIVALENCE_TOL:
                    raise EquivalenceError(
                        f"equivalence gate: parallel scan (L={L}, N={N}, block={block}) differs from "
                        f"sequential by {err:.3e} (tolerance {EQUIVALENCE_TOL:g})")
            for name, fn in seq_impls:
                t = _time(lambda: fn(*args), repeats)
                rows.append(BenchRow(L, N, 0, name, 1e9 * t / elems))
            for block in blocks:
                t = _time(lambda: _parallel_forward(*args, block=block), repeats)
                rows.append(BenchRow(L, N, block, "parallel", 1e9 * t / elems))
    return rows


def rows_to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.L, r.N, r.block, r.impl, f"{r.ns_per_elem:.3f}"])
    return buf.getvalue()
