"""Timing comparison of the compiled kernel core against the NumPy fallback.

Runs each hot kernel on a representative workload with both backends and
prints a table of per-call times and speedups.  Usage:

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import importlib
import time

import numpy as np


def _load_backends():
    from slicedpat._kernels import _fallback

    backends = [("fallback", _fallback)]
    try:
        _core = importlib.import_module("slicedpat._kernels._core")
        backends.insert(0, ("compiled", _core))
    except ImportError:
        pass
    return backends


def _workloads(rng):
    n = 40000
    k = rng.uniform(0.0, 0.999, n)
    x = rng.uniform(1e-3, 40.0, n)

    nq = 150
    qx = rng.uniform(-0.3, 0.3, nq)
    qy = rng.uniform(-0.3, 0.3, nq)
    qw = rng.uniform(0.5, 1.0, nq) * 1e-3
    zx = rng.uniform(-0.8, 0.8, 48)
    zy = rng.uniform(-0.8, 0.8, 48)
    times = np.linspace(0.05, 3.0, 120)

    shape3 = (24, 24, 24)
    vals3 = rng.standard_normal(shape3)
    origin3 = (-1.0, -1.0, -1.0)
    sp3 = (2.0 / 23, 2.0 / 23, 2.0 / 23)
    zpts = rng.uniform(-0.5, 0.5, (40, 3))
    xdet = np.array([1.0, 0.0, 0.0])
    t3 = np.linspace(0.2, 2.5, 30)
    eta, etaw = np.polynomial.legendre.leggauss(24)
    pts_q = rng.uniform(-0.9, 0.9, (200000, 3))

    return {
        "elliptic_ke": lambda b: b.elliptic_ke(k),
        "bessel_j0y0": lambda b: b.bessel_j0y0(x),
        "twocenter_w": lambda b: b.twocenter_w(
            qx, qy, qw, 1.0, 0.0, zx, zy, times, 1e-3, 2e-3
        ),
        "trilinear": lambda b: b.trilinear(
            vals3, origin3[0], origin3[1], origin3[2], sp3[0], sp3[1], sp3[2], pts_q
        ),
        "ellipsoid_n3d": lambda b: b.ellipsoid_n3d(
            vals3, origin3[0], origin3[1], origin3[2], sp3[0], sp3[1], sp3[2],
            xdet, zpts, t3, eta, etaw, 48
        ),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = _load_backends()
    rng = np.random.default_rng(7)
    work = _workloads(rng)

    print(f"{'kernel':<16}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for kernel, call in work.items():
        row = []
        for _, mod in backends:
            call(mod)  # warm up
            best = np.inf
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                call(mod)
                best = min(best, time.perf_counter() - t0)
            row.append(best)
        speed = row[-1] / row[0] if len(row) == 2 else float("nan")
        cells = "".join(f"{1e3 * v:>12.2f}ms" for v in row)
        print(f"{kernel:<16}{cells}{speed:>9.1f}x")
    if len(backends) == 1:
        print("compiled core unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
