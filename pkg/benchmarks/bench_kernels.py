"""Time the numba and numpy grid kernels on oracle-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from qrfgauss import _kernels


def _inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    grid = np.linspace(-7.0, 7.0, n)
    values = np.exp(-0.5 * grid**2)[None, :] * np.exp(1j * rng.uniform(0, 1, (n, 1)))
    query = grid[None, :] + rng.uniform(-0.5, 0.5, (n, 1))
    return values, grid[0], grid[1] - grid[0], query


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--size", type=int, default=512, help="points per axis of the 2D grid")
    args = parser.parse_args(argv)

    values, start, step, query = _inputs(args.size)
    cases = {
        "interp_rows": lambda nb: _kernels.interp_rows(values, start, step, query, use_numba=nb),
        "diff_axis": lambda nb: _kernels.diff_axis(values, step, axis=1, use_numba=nb),
    }
    print(f"{'kernel':<12} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, fn in cases.items():
        fn(True)  # compile outside the timed region
        a, b = fn(False), fn(True)
        same = np.allclose(a[0] if isinstance(a, tuple) else a, b[0] if isinstance(b, tuple) else b, atol=1e-12)
        t_np = min(timeit.repeat(lambda: fn(False), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: fn(True), number=1, repeat=args.repeat)) * 1e3
        flag = "" if same else "  (outputs differ)"
        print(f"{name:<12} {t_np:>10.2f} {t_nb:>10.2f} {t_np / t_nb:>7.1f}x{flag}")


if __name__ == "__main__":
    main()
