"""Time the compiled and pure-Python kernels on the operations the simulator uses.

Usage::

    python benchmarks/bench_kernels.py [--reps 200] [--n 801]

Reports per-call times for building the mixture, a single mixture quantile,
and a full adaptive interval (the per-replication cost of a simulation).
"""
import argparse
import time

import numpy as np

from shrinkmeta import _backend
from shrinkmeta.model import half_normal_quantile


def _time(fn, reps):
    fn()
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench(kern, reps, n, datasets):
    y, s = datasets[0]
    tau_max = max(half_normal_quantile(1 - 1e-6, 0.5), 10 * s.max())
    _, w, m, sd = kern.build_mixture(y, s, 0, 0.5, tau_max, n)
    out = {
        "build_mixture": _time(lambda: kern.build_mixture(y, s, 0, 0.5, tau_max, n), reps),
        "mixture_quantile": _time(lambda: kern.mixture_quantile(0.975, w, m, sd), reps),
    }
    it = iter(range(10 ** 9))

    def interval():
        yy, ss = datasets[next(it) % len(datasets)]
        tm = max(half_normal_quantile(1 - 1e-6, 0.5), 10 * ss.max())
        kern.refined_interval(yy, ss, 0, 0.5, tm, 0.025, 0.975, n, 51201, 1e-6)

    out["refined_interval"] = _time(interval, reps)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--n", type=int, default=801, help="grid nodes for build/quantile")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(1)
    s = np.array([4 / 5, 4 / 20])
    datasets = [(rng.normal(0, np.sqrt(s ** 2 + 0.25)), s) for _ in range(64)]
    results = {}
    for name in ("cython", "python"):
        if name not in _backend.available():
            print("compiled extension not built; skipping")
            continue
        results[name] = bench(_backend.get(name), args.reps, args.n, datasets)
    print(f"{'operation':<20}" + "".join(f"{k:>14}" for k in results) + ("   speedup" if len(results) == 2 else ""))
    for op in ("build_mixture", "mixture_quantile", "refined_interval"):
        line = f"{op:<20}" + "".join(f"{results[k][op] * 1e6:>12.1f}us" for k in results)
        if len(results) == 2:
            line += f"   {results['python'][op] / results['cython'][op]:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
