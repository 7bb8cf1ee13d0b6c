"""Compiled kernels against the numpy fallback, plus one end-to-end risk curve.

    python3 benchmarks/bench_kernels.py [--sizes 10000,1000000] [--repeat 5]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ordstat import _kernels_py

try:
    from ordstat import _kernels as _compiled
except ImportError:
    _compiled = None


def _cases(n, rng):
    p = rng.uniform(1e-12, 1 - 1e-12, n)
    normals = rng.standard_normal(n)
    unif = rng.uniform(size=n)
    x1 = rng.exponential(size=n)
    x2 = rng.exponential(size=n) + 0.5
    loss = rng.standard_normal(n) ** 2
    return {
        "norm_ppf": lambda k: k.norm_ppf(p),
        "gamma_mt_candidates": lambda k: k.gamma_mt_candidates(2.5, normals, unif),
        "mixed_loss": lambda k: k.mixed_loss(x1, x2, 1, True, 0.5, 1.0, 0.6, 1.0),
        "mean_and_m2": lambda k: k.mean_and_m2(loss),
    }


def _best(fn, repeat):
    number = 1
    while True:
        t = timeit.timeit(fn, number=number)
        if t > 0.05 or number >= 1 << 16:
            break
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def _risk_curve_seconds(backend):
    code = ("import time, ordstat; from ordstat import models as M, risk_engine as R;"
            "from ordstat.estimators import named_estimator as ne;"
            "m = M.gamma_scale(1, 1); s = ne(m, 'gamma-dominator', 'theta1');"
            "t = time.perf_counter(); R.simulate_risk(m, s, n=100_000);"
            "print(ordstat.BACKEND, time.perf_counter() - t)")
    env = dict(os.environ, ORDSTAT_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    name, secs = out.stdout.split()
    return name, float(secs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", default="10000,1000000")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled kernels are not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'n':>10}{'numpy [ms]':>14}{'compiled [ms]':>16}{'speed-up':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, call in _cases(n, rng).items():
            t_py = _best(lambda: call(_kernels_py), args.repeat)
            if _compiled is None:
                print(f"{name:<22}{n:>10}{t_py * 1e3:>14.3f}{'-':>16}{'-':>10}")
                continue
            t_c = _best(lambda: call(_compiled), args.repeat)
            print(f"{name:<22}{n:>10}{t_py * 1e3:>14.3f}{t_c * 1e3:>16.3f}{t_py / t_c:>9.1f}x")
    print()
    print("risk curve, 30 cells x 1e5 draws:")
    for backend in ("python", "compiled"):
        name, secs = _risk_curve_seconds(backend)
        print(f"  requested {backend:<9} -> {name:<9} {secs:.3f} s")


if __name__ == "__main__":
    main()
