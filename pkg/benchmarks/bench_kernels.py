"""Benchmark the compiled kernels against the pure numpy fallback.

Runs the hot paths (tape evaluation with a grid-backed f, interpolation,
finite-difference derivatives) on both backends in one process and prints
a timing table.  Usage:

    python3 benchmarks/bench_kernels.py [--points N] [--queries N] [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import fesqueeze._kernels as kernels
from fesqueeze._kernels import MODE_LOGLOG, grid_fspec, pure
from fesqueeze.expr import parse_relation
from fesqueeze.gridfn import Grid, isolate_pivot
from fesqueeze.tape import compile_tape

try:
    from fesqueeze._kernels import _native as native
except ImportError:
    native = None


def _time(fn, repeat: int) -> float:
    """Median wall time in milliseconds over `repeat` runs (after a warmup)."""
    fn()
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1e3)
    samples.sort()
    return samples[len(samples) // 2]


def _scenarios(points: int, queries: int):
    grid = Grid.log(1e-3, 1e3, points)
    values = 0.7 * grid.points + np.sqrt(grid.points)
    spec = grid_fspec(grid.points, values, MODE_LOGLOG)
    rel = parse_relation("f(x) + f(f(x)) = 2*x")
    tape = compile_tape(isolate_pivot(rel))
    rng = np.random.default_rng(0)
    q = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), queries))
    q.sort()

    def run_tape():
        kernels.eval_tape(tape, grid.points, fspec=spec)

    def run_interp():
        kernels.grid_interp(q, spec)

    def run_derivative():
        kernels.grid_derivative(q, spec)

    return [
        (f"eval_tape ({points} pts)", run_tape),
        (f"grid_interp ({queries} queries)", run_interp),
        (f"grid_derivative ({queries} queries)", run_derivative),
    ]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--queries", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=25)
    args = ap.parse_args()

    backends = [("pure", pure)]
    if native is not None:
        backends.append(("native", native))
    else:
        print("compiled extension not importable; timing the fallback only")

    rows = []
    saved = kernels._impl
    try:
        for label, fn in _scenarios(args.points, args.queries):
            timings = {}
            for name, impl in backends:
                kernels._impl = impl
                timings[name] = _time(fn, args.repeat)
            rows.append((label, timings))
    finally:
        kernels._impl = saved

    width = max(len(r[0]) for r in rows)
    header = f"{'scenario':<{width}}  {'pure (ms)':>10}"
    if native is not None:
        header += f"  {'native (ms)':>12}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, timings in rows:
        line = f"{label:<{width}}  {timings['pure']:>10.3f}"
        if native is not None:
            ratio = timings["pure"] / timings["native"] if timings["native"] > 0 else float("inf")
            line += f"  {timings['native']:>12.3f}  {ratio:>7.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
