"""Time the compiled and pure-Python recurrence kernels on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--N 200000] [--repeat 3]
"""

import argparse
import math
import time

import numpy as np

from jacobi_wvn import kernels
from jacobi_wvn.bands import find_bands, invert_theta
from jacobi_wvn.core import PeriodicOperator
from jacobi_wvn.potential import WvnPotential
from jacobi_wvn.resonance import plan_resonance


def _setup(period):
    op = PeriodicOperator(np.linspace(0.8, 1.6, period), np.linspace(-0.2, 0.3, period))
    lam = invert_theta(op, find_bands(op)[-1], 0.4 * math.pi)
    plan = plan_resonance(op, lam)
    p = WvnPotential.from_plans([plan], 2 * plan.c_threshold)
    cs, ws, ps, qh = p.kernel_args()
    return op.a.copy(), op.b.copy(), lam, cs, ws, ps, qh


def _best(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = {"python": kernels.get_backend("python")}
    try:
        backends["cython"] = kernels.get_backend("cython")
    except ImportError:
        print("compiled kernels not built; timing the Python fallback only")
    N = args.N
    print(f"N = {N}, best of {args.repeat}")
    print(f"{'kernel':<14}{'T':>3}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for period in (1, 3):
        a, b, lam, cs, ws, ps, qh = _setup(period)
        cases = {
            "forward": lambda k: k.forward(a, b, lam, cs, ws, ps, qh, 0.0, 1, 0.0, 1.0, N, True),
            "forward_pair": lambda k: k.forward_pair(a, b, lam, cs, ws, ps, qh, 0.0, 1, N, True),
            "backward": lambda k: k.backward(a, b, lam, cs, ws, ps, qh, 0.0, 1, 8 * N, 1.0, 0.0, N),
        }
        for name, call in cases.items():
            times = {bn: _best(lambda: call(k), args.repeat) for bn, k in backends.items()}
            ref = call(backends["python"])[0]
            line = f"{name:<14}{period:>3}" + "".join(f"{t:>11.4f}s" for t in times.values())
            if "cython" in times:
                got = call(backends["cython"])[0]
                assert np.allclose(got, ref, rtol=1e-12, atol=0), "backends disagree"
                line += f"{times['python'] / times['cython']:>9.1f}x"
            print(line)


if __name__ == "__main__":
    main()
