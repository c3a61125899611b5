#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-numpy fallback.

Times the three hot loops on tracker-realistic shapes, checks the two
backends agree bit for bit, and prints a speedup table.

Run: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from twinsim.kernels import _core_py

try:
    from twinsim.kernels import _core
except ImportError:
    _core = None


def timeit(fn, *args, repeat=200):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_predict(impl, n):
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 30, n)
    y = rng.uniform(0, 20, n)
    vx = rng.normal(1.5, 0.5, n)
    vy = rng.normal(0, 0.5, n)
    noise = [rng.normal(0, 0.2, n) for _ in range(4)]

    def step():
        impl.predict_particles(x.copy(), y.copy(), vx.copy(), vy.copy(),
                               *noise, 1.0, 0.0, 30.0, 0.0, 20.0)
    return timeit(step)


def bench_weight(impl, n, n_cells=1700, n_twins=96, n_obs=12):
    rng = np.random.default_rng(1)
    table = rng.uniform(1e-3, 1.0, (n_cells, n_twins, 11))
    cells = rng.integers(0, n_cells, n)
    tw = rng.integers(0, n_twins, n_obs)
    ct = rng.integers(0, 11, n_obs)

    def step():
        impl.weight_particles(cells, table, tw, ct)
    return timeit(step)


def bench_resample(impl, n):
    rng = np.random.default_rng(2)
    w = rng.uniform(0, 1, n)
    cdf = np.cumsum(w / w.sum())
    u = rng.random(n)

    def step():
        impl.resample_indices(cdf, u)
    return timeit(step)


def check_parity(n=5000):
    if _core is None:
        return "n/a"
    rng = np.random.default_rng(3)
    state = [rng.uniform(0, 30, n), rng.uniform(0, 20, n),
             rng.normal(1, 1, n), rng.normal(0, 1, n)]
    noise = [rng.normal(0, 0.3, n) for _ in range(4)]
    a = [v.copy() for v in state]
    b = [v.copy() for v in state]
    _core.predict_particles(*a, *[v.copy() for v in noise], 1.0, 0, 30, 0, 20)
    _core_py.predict_particles(*b, *[v.copy() for v in noise], 1.0, 0, 30, 0, 20)
    ok = all(np.array_equal(u, v) for u, v in zip(a, b))

    table = rng.uniform(1e-3, 1, (400, 96, 11))
    cells = rng.integers(0, 400, n)
    tw = rng.integers(0, 96, 10)
    ct = rng.integers(0, 11, 10)
    ok &= np.array_equal(_core.weight_particles(cells, table, tw, ct),
                         _core_py.weight_particles(cells, table, tw, ct))
    w = rng.uniform(0, 1, n)
    cdf = np.cumsum(w / w.sum())
    u = rng.random(n)
    ok &= np.array_equal(_core.resample_indices(cdf, u),
                         _core_py.resample_indices(cdf, u))
    return "bit-identical" if ok else "MISMATCH"


def main():
    print(f"compiled backend available: {_core is not None}")
    print(f"parity check: {check_parity()}")
    print()
    print(f"{'kernel':<22}{'n':>8}{'numpy (us)':>14}{'compiled (us)':>16}{'speedup':>10}")
    for name, fn in (("predict_particles", bench_predict),
                     ("weight_particles", bench_weight),
                     ("resample_indices", bench_resample)):
        for n in (500, 5000, 50000):
            t_py = fn(_core_py, n) * 1e6
            if _core is not None:
                t_c = fn(_core, n) * 1e6
                print(f"{name:<22}{n:>8}{t_py:>14.1f}{t_c:>16.1f}"
                      f"{t_py / t_c:>9.1f}x")
            else:
                print(f"{name:<22}{n:>8}{t_py:>14.1f}{'-':>16}{'-':>10}")


if __name__ == "__main__":
    main()
