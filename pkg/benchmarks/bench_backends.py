"""Timing comparison of the numba kernels against the pure-numpy fallback.

Runs each batched 2x2 kernel on instanton-shaped inputs at several batch
sizes and prints a table of per-call times and speedups.  Run directly:

    python3 benchmarks/bench_backends.py [--sizes 4096,65536] [--repeat 5]
"""

import argparse
import time

import numpy as np

from sdymflow.adhm import OneInstantonParams, closed_form_G_modes
from sdymflow.kernels import numpy_backend

try:
    from sdymflow.kernels import numba_backend
except ImportError:
    numba_backend = None


def make_inputs(n, rng):
    """Batched matrices from actual k = 1 line data plus random hermitians."""
    p = OneInstantonParams(1.0, 0.2 + 0.1j, -0.3)
    u = rng.normal(size=n) + 1j * rng.normal(size=n)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    m = closed_form_G_modes(p, u, v)
    g_m1, g_0, g_p1 = m[:, 0], m[:, 1], m[:, 2]
    a = rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2))
    herm = a @ np.conj(np.swapaxes(a, -1, -2)) + 0.1 * np.eye(2)
    return g_m1, g_0, g_p1, a, herm


def bench(fn, args, repeat):
    fn(*args)  # warm-up (and numba compilation)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="4096,65536")
    ap.add_argument("--repeat", type=int, default=5)
    opts = ap.parse_args()
    sizes = [int(s) for s in opts.sizes.split(",")]
    rng = np.random.default_rng(0)

    if numba_backend is None:
        print("numba backend unavailable; nothing to compare")
        return

    for n in sizes:
        g_m1, g_0, g_p1, a, herm = make_inputs(n, rng)
        cases = [
            ("det2", (a,)),
            ("inv2", (a,)),
            ("mul2", (a, a)),
            ("herm_sqrt2", (herm,)),
            ("j_from_modes", (g_m1, g_0, g_p1)),
            ("split_residual_modes", (g_m1, g_0, g_p1)),
        ]
        print(f"\nbatch size {n}")
        print(f"{'kernel':<22}{'numpy':>12}{'numba':>12}{'speedup':>10}")
        for name, args in cases:
            t_np = bench(getattr(numpy_backend, name), args, opts.repeat)
            t_nb = bench(getattr(numba_backend, name), args, opts.repeat)
            ref = getattr(numpy_backend, name)(*args)
            out = getattr(numba_backend, name)(*args)
            err = float(np.abs(np.asarray(ref) - np.asarray(out)).max())
            if err > 1e-10:
                raise AssertionError(f"{name}: backends disagree ({err:.2e})")
            print(f"{name:<22}{t_np * 1e3:>10.2f}ms{t_nb * 1e3:>10.2f}ms{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
