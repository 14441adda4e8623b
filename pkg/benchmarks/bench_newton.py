"""Compiled vs pure-Python Newton kernel.

    python benchmarks/bench_newton.py [--repeat N]

Times one implicit-step solve on several grids, then a full 2000-step run
with each backend. The compiled kernel is skipped if the extension was not
built.
"""
import argparse
import time

import numpy as np

from fracdiff import _newton_py
from fracdiff._backend import compiled_available
from fracdiff.implicit import run, sample_initial
from fracdiff.kernel import Grid, kernel_for_grid


def _solvers():
    out = {"python": _newton_py.newton_solve}
    if compiled_available():
        from fracdiff._newton_ext import newton_solve

        out["compiled"] = newton_solve
    return out


def bench_solve(solvers, h, q, repeat):
    grid = Grid.from_step(1.0, h)
    D = kernel_for_grid(0.5, grid).matrix(grid)
    u = sample_initial(grid, "bump").values
    dt = 1e-3
    b = np.sign(u) * np.abs(u) ** (q - 1.0)
    # the stepper always regularizes the q < 2 Jacobian at zero nodes
    delta = 1e-14 if q < 2 else 0.0
    row = {}
    for name, solve in solvers.items():
        solve(D, 1.0, dt, b, u, q, 1e-8, 100, delta)
        t = time.perf_counter()
        for _ in range(repeat):
            v, iters, _, status = solve(D, 1.0, dt, b, u, q, 1e-8, 100, delta)
        row[name] = (time.perf_counter() - t) / repeat
        assert status == 0
    return grid.size, row


def bench_run(solvers, q):
    grid = Grid.from_step(1.0, 0.05)
    k = kernel_for_grid(0.25, grid)
    u0 = sample_initial(grid, "bump")
    row = {}
    for name, solve in solvers.items():
        t = time.perf_counter()
        run(k, u0, 1e-3, q, 2000, solver=solve)
        row[name] = time.perf_counter() - t
    return row


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    solvers = _solvers()
    names = list(solvers)
    print("single solve (seconds per call)")
    print(f"{'h':>10} {'nodes':>6} " + " ".join(f"{n:>12}" for n in names) + "   speedup")
    for h in (0.1, 0.05, 0.025, 0.0125):
        for q in (1.5, 2.4):
            n, row = bench_solve(solvers, h, q, max(10, int(args.repeat * h / 0.05)))
            sp = row["python"] / row["compiled"] if "compiled" in row else float("nan")
            print(f"{h:>10} {n:>6} " + " ".join(f"{row[k]:12.3e}" for k in names) + f"   {sp:6.2f}x  (q={q})")
    print("\n2000-step implicit run, theta=0.25, h=0.05 (seconds)")
    for q in (1.5, 2.4):
        row = bench_run(solvers, q)
        print(f"q={q}: " + ", ".join(f"{k} {v:.3f}" for k, v in row.items()))


if __name__ == "__main__":
    main()
