"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_backends.py [--repeat 50] [--full-run]

Kernel timings call both implementations directly in this process. With
``--full-run`` the same experiment is also run end to end in two subprocesses,
one with ``DECOPT_DISABLE_NUMBA=1``.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from decopt import kernels
from decopt.datasets import logistic_from_samples, synth_logistic_samples, synth_quadratic


def cases():
    rng = np.random.default_rng(0)
    quad = synth_quadratic(50, 100.0, 10, seed=1)
    Xq = rng.standard_normal((10, 50))
    logi = logistic_from_samples(synth_logistic_samples(5000, 100, seed=2), 10, "L2", 1.0)
    Xl = rng.standard_normal((10, 100))
    largs = (logi.indptr, logi.indices, logi.data, logi.labels, logi.row_node, Xl, kernels.REG_L2, 0.1)
    v, s, yc, yh, d = rng.standard_normal((5, 10, 100))
    return {
        "quad_grad n=10 p=50": lambda m: m.quad_grad(quad.A, quad.b, Xq),
        "logistic_grad 5000x100": lambda m: m.logistic_grad(*largs),
        "logistic_values 5000x100": lambda m: m.logistic_values(*largs),
        "ndcg_direction": lambda m: m.ndcg_direction(v, s, yc, yh, d, 1e-300),
        "sdcg_direction PRP": lambda m: m.sdcg_direction(v, s, d, kernels.CG_PRP, 1e-300),
        "dmbfgs_directions": lambda m: m.dmbfgs_directions(v, s, yc, yh, 1e-4, 1e4, 1e-300),
    }


def bench_kernels(repeat: int) -> None:
    impls = {"numpy": kernels.numpy_impl}
    if kernels.numba_impl is not None:
        impls["numba"] = kernels.numba_impl
    print(f"{'kernel':<28s}" + "".join(f"{k:>14s}" for k in impls) + f"{'speedup':>10s}")
    for name, fn in cases().items():
        times = {}
        for label, mod in impls.items():
            fn(mod)  # warm-up, triggers compilation
            times[label] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=repeat)) * 1e6
        row = f"{name:<28s}" + "".join(f"{times[k]:12.1f}us" for k in impls)
        if "numba" in times:
            row += f"{times['numpy'] / times['numba']:9.2f}x"
        print(row)


RUN_TEMPLATE = """
[algorithm]
name = "dmbfgs"
alpha = 0.05
[problem]
kind = "synthetic_logistic"
num_samples = {samples}
p = 50
[network]
n = 10
density = 0.56
[run]
max_iters = {iters}
compute_z_star = false
metrics = ["optimality_error"]
"""


def timed_run() -> None:
    from decopt import runner

    runner.run(runner.load_config(RUN_TEMPLATE.format(samples=200, iters=3)))  # compile outside the timer
    cfg = runner.load_config(RUN_TEMPLATE.format(samples=4000, iters=500))
    t0 = time.perf_counter()
    runner.run(cfg)
    print(kernels.BACKEND, time.perf_counter() - t0)


def bench_full_run() -> None:
    for flag in ("0", "1"):
        env = dict(os.environ, DECOPT_DISABLE_NUMBA=flag)
        cmd = [sys.executable, os.path.abspath(__file__), "--child"]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"full run (dmbfgs, 500 iters, 4000x50 logistic) backend={backend:<6s} {float(secs):8.3f}s")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--full-run", action="store_true")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        timed_run()
        return
    print(f"active backend: {kernels.BACKEND}")
    bench_kernels(args.repeat)
    if args.full_run:
        bench_full_run()


if __name__ == "__main__":
    main()
