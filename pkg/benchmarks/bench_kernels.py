"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--m 500] [--repeat 5]

Also times a full training pass (add_sample over a simulated drive) under each
backend by running it in a subprocess with ASSOCNW_PURE set or unset.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from assocnw import _pykernels as py

try:
    from assocnw import _ckernels as ck
except ImportError:  # pragma: no cover
    ck = None

TRAIN = r"""
import time
from assocnw import kernels
from assocnw.control import new_car_model, teach
from assocnw.powertrain import DriverParams, PlantParams, calibrate, simulate_drive
drive = simulate_drive(calibrate(PlantParams()), DriverParams(), {seconds}, seed=0)
t = time.perf_counter()
teach(new_car_model(), drive)
print(kernels.BACKEND, time.perf_counter() - t)
"""


def cases(m, d=4, seed=0):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(m, d))
    s = rng.uniform(0.3, 1.5, (m, d))
    w = rng.random(m)
    w /= w.sum()
    lw = np.log(w)
    pts = rng.normal(size=(2000, d))
    z = c / c.std(0)
    dist = py.sq_dist_matrix(z)
    q = np.vstack([py.merge_q(c[i], s[i], c, s) for i in range(m)])
    return {
        "log_terms": lambda k: k.log_terms(pts[0], c, s, lw),
        "log_density_many(2000 pts)": lambda k: k.log_density_many(pts, c, s, lw),
        "sq_dist_matrix": lambda k: k.sq_dist_matrix(z),
        "loo_loglik": lambda k: k.loo_loglik(dist, w, 0.3, d),
        "merge_q": lambda k: k.merge_q(c[0], s[0], c, s),
        "best_pair": lambda k: k.best_pair(q, w, m),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--train-seconds", type=float, default=100.0,
                    help="simulated drive length for the end-to-end timing (0 skips it)")
    args = ap.parse_args()
    if ck is None:
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    print(f"kernel timings, m={args.m} kernels, best of {args.repeat}")
    print(f"{'kernel':<28}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(args.m).items():
        t = {}
        for tag, mod in (("py", py), ("c", ck)):
            n = 3
            t[tag] = min(timeit.repeat(lambda: fn(mod), number=n, repeat=args.repeat)) / n * 1e3
        print(f"{name:<28}{t['py']:>12.4f}{t['c']:>12.4f}{t['py'] / t['c']:>9.1f}x")
    if args.train_seconds > 0:
        print(f"\nend-to-end training on a {args.train_seconds:g} s drive:")
        for pure in (False, True):
            env = dict(os.environ)
            env.pop("ASSOCNW_PURE", None)
            if pure:
                env["ASSOCNW_PURE"] = "1"
            out = subprocess.run([sys.executable, "-c",
                                  TRAIN.format(seconds=args.train_seconds)],
                                 env=env, capture_output=True, text=True, check=True).stdout
            backend, secs = out.split()
            print(f"  {backend:<8}{float(secs):8.2f} s")


if __name__ == "__main__":
    main()
