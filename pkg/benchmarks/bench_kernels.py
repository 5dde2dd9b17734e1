"""Compiled kernels vs the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the three hot kernels on scenario-sized inputs and checks that both
backends agree.  End-to-end numbers come from running a CLI verb twice,
once with GFDOMAIN_PURE_PYTHON=1.
"""

import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from gfdomain import _pykernels
from gfdomain.experiments import Scenario, scenario_map
from gfdomain.polyalg import monomial_index

try:
    from gfdomain import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    idx = monomial_index(6, 6)  # FPU flow size
    a, b = rng.normal(size=idx.size), rng.normal(size=idx.size)
    ia, ib, ik = idx.mul_pairs
    yield "mul_trunc (6 vars, order 6)", "mul_trunc", (a, b, ia, ib, ik, idx.size)

    idx = monomial_index(4, 8)
    exps = np.ascontiguousarray(idx.exps, dtype=np.int32)
    pts = rng.uniform(-0.1, 0.1, size=(2000, 4))
    yield "monomial_values (4 vars, order 8, 2000 pts)", "monomial_values", (exps, pts)

    pm = scenario_map(Scenario("poly4d"))
    coeffs = np.ascontiguousarray(pm.coeff_matrix())
    exps = np.ascontiguousarray(pm.index.exps, dtype=np.int32)
    start = np.zeros((50, 4))
    start[:, 0] = np.linspace(0.001, 0.05, 50)
    yield "track (poly4d, 50 launches, 2000 turns)", "track", (coeffs, exps, start, 2000, 1.0)


def same(name, x, y):
    if name != "track":
        return str(np.allclose(x, y, rtol=1e-12, atol=1e-300))
    # chaotic orbits near the aperture edge depend on summation order; compare bounded ones
    (fx, sx), (fy, sy) = (tuple(np.asarray(a) for a in r) for r in (x, y))
    full = (sx == sx.max()) & (sy == sy.max())
    ok = np.allclose(fx[full], fy[full], rtol=1e-9, atol=1e-12)
    return f"{ok} (escape turn differs for {int(np.sum(sx != sy))} orbits)"


def end_to_end(argv, pure):
    env = dict(os.environ)
    if pure:
        env["GFDOMAIN_PURE_PYTHON"] = "1"
    t0 = time.perf_counter()
    subprocess.run([sys.executable, "-m", "gfdomain", *argv], env=env, check=True,
                   stdout=subprocess.DEVNULL)
    return time.perf_counter() - t0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--no-e2e", action="store_true", help="skip the end-to-end CLI timings")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':48s} {'cython [ms]':>12s} {'numpy [ms]':>12s} {'speedup':>8s}  agree")
    for label, name, inputs in cases(rng):
        fc, fp = getattr(_ckernels, name), getattr(_pykernels, name)
        tc = min(timeit.repeat(lambda: fc(*inputs), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fp(*inputs), number=1, repeat=args.repeat))
        print(f"{label:48s} {1e3 * tc:12.3f} {1e3 * tp:12.3f} {tp / tc:8.1f}  {same(name, fc(*inputs), fp(*inputs))}")
    if not args.no_e2e:
        for verb in (["certify", "poly4d"], ["track", "cubic2d", "--turns", "2000", "--launches", "50"]):
            tc, tp = end_to_end(verb, False), end_to_end(verb, True)
            print(f"{'gfdomain ' + ' '.join(verb):48s} {1e3 * tc:12.0f} {1e3 * tp:12.0f} {tp / tc:8.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
