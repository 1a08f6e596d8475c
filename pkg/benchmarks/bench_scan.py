"""Compare the compiled scan kernels against the numpy fallback.

    python benchmarks/bench_scan.py [--lengths 256,1024,4096] [--state 16] [--channels 8]

Prints a CSV: L,N,E,kernel,backend,ms,speedup. Both backends are checked for
agreement before anything is timed.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from semnet import kernels
from semnet.bench import random_scan_inputs, relative_error


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lengths", default="256,1024,4096")
    p.add_argument("--state", type=int, default=16)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--repeats", type=int, default=5)
    args = p.parse_args(argv)

    compiled, python = kernels.compiled_backend, kernels.python_backend
    if compiled is None:
        print("compiled extension not available; rebuild with pip install -e .", file=sys.stderr)
        return 1

    rng = np.random.default_rng(0)
    print("L,N,E,kernel,backend,ms,speedup")
    for L in (int(s) for s in args.lengths.split(",")):
        x, delta, A, B, C, D = random_scan_inputs(rng, L, args.state, channels=args.channels)
        dy = rng.standard_normal(x.shape)
        y_c, h_c = compiled.ssm_forward(x, delta, A, B, C, D)
        y_p, h_p = python.ssm_forward(x, delta, A, B, C, D)
        assert relative_error(y_c, y_p) <= 1e-12
        grads_c = compiled.ssm_backward(dy, x, delta, A, B, C, D, h_c)
        grads_p = python.ssm_backward(dy, x, delta, A, B, C, D, h_p)
        assert all(relative_error(a, b) <= 1e-10 for a, b in zip(grads_c, grads_p))

        cases = {
            "scan": lambda be: be.ssm_scan(x, delta, A, B, C, D),
            "forward": lambda be: be.ssm_forward(x, delta, A, B, C, D),
            "backward": lambda be: be.ssm_backward(dy, x, delta, A, B, C, D, h_c),
        }
        for name, run in cases.items():
            t_c = best_of(lambda: run(compiled), args.repeats)
            t_p = best_of(lambda: run(python), args.repeats)
            dims = f"{L},{args.state},{args.channels},{name}"
            print(f"{dims},compiled,{1e3 * t_c:.3f},{t_p / t_c:.1f}")
            print(f"{dims},python,{1e3 * t_p:.3f},1.0")
    return 0


if __name__ == "__main__":
    sys.exit(main())
