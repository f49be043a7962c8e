"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from fieldrecon import kernels
from fieldrecon.dynamics import NetworkSystem
from fieldrecon.graph import build_chain, build_grid


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    grid = NetworkSystem.from_graph(build_grid(10, 10), 30)
    chain = NetworkSystem.from_graph(build_chain(9), 9)
    lam, _ = grid.eig
    step_decay = np.exp(-lam * 0.1)
    forcing = rng.normal(size=(501, 100))
    noise = rng.normal(size=(40_000, 9)) * np.sqrt(5e-3)
    yield "modal_sweep grid(10,10) 501 samples", lambda k: k.modal_sweep(step_decay, forcing)
    yield "adjoint_rk4 grid(10,10) 501 samples", \
        lambda k: k.adjoint_rk4(*grid.csr.args(), forcing, 0.1)
    yield "em_path chain(9) 40000 steps", \
        lambda k: k.em_path(*chain.csr.args(), np.zeros(9), noise, 5e-3)
    x = rng.normal(size=100)
    yield "csr_matvec grid(10,10) x1000", \
        lambda k: [k.csr_matvec(*grid.csr.args(), x) for _ in range(1000)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return
    py, cy = kernels.backend("python"), kernels.backend("cython")
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases(rng):
        a, b = fn(py), fn(cy)
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12), name
        tp = best_of(lambda: fn(py), args.repeat)
        tc = best_of(lambda: fn(cy), args.repeat)
        print(f"{name:40s} {1e3 * tp:12.2f} {1e3 * tc:12.2f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
