"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from fracheat import _kernels_py

try:
    from fracheat import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def cases():
    rng = np.random.default_rng(0)
    for n in (256, 1024):
        nodes = ((np.arange(n) + 0.5) / n)[:, None]
        yield f"pair matrix d=1 N={n}", "pair_kernel_matrix", (nodes, np.full(n, 1 / n), 1.5)
    for m in (24, 40):
        c = (np.arange(m) + 0.5) / m
        xx, yy = np.meshgrid(c, c)
        sq = np.column_stack([xx.ravel(), yy.ravel()])
        yield f"pair matrix d=2 N={m * m}", "pair_kernel_matrix", (sq, np.full(m * m, 1 / m ** 2), 3.5)
        yield f"exterior tail square N={m * m}", "exterior_tail_square", (sq, 0.5)
        ghosts = rng.random((4 * m + 4, 2)) + 1.0
        yield f"ghost tail N={m * m}", "ghost_tail", (sq, ghosts, 1 / m ** 2, 3.5)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    print(f"{'case':32s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speedup':>8s}  max rel diff")
    for label, name, a in cases():
        t_py = min(timeit.repeat(lambda: getattr(_kernels_py, name)(*a), number=1, repeat=args.repeat))
        if _kernels_c is None:
            print(f"{label:32s} {1e3 * t_py:11.2f} {'n/a':>12s}")
            continue
        t_c = min(timeit.repeat(lambda: getattr(_kernels_c, name)(*a), number=1, repeat=args.repeat))
        ref, got = getattr(_kernels_py, name)(*a), getattr(_kernels_c, name)(*a)
        diff = np.abs(got - ref).max() / np.abs(ref).max()
        print(f"{label:32s} {1e3 * t_py:11.2f} {1e3 * t_c:12.2f} {t_py / t_c:8.1f}  {diff:.1e}")


if __name__ == "__main__":
    main()
