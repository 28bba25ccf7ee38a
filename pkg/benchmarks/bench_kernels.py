"""Compare the numba kernels against their pure-numpy fallbacks.

Run ``python benchmarks/bench_kernels.py``. Each kernel is timed on the same
batch of simulated series through both implementations, and the outputs are
checked for agreement. ``--grid`` additionally times a small power grid end to
end in two subprocesses, one with ``CHANGEPOWER_DISABLE_NUMBA=1``.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from changepower import kernels
from changepower.simulate import ScenarioSpec, replicate_normals
from changepower.power import simulate_batch


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(x, y, rtol=1e-9, atol=1e-9, equal_nan=True) for x, y in zip(a, b))


def kernel_cases(reps, n):
    X = simulate_batch(ScenarioSpec(n, 2.0, 2), replicate_normals(n, 1, 0, reps))
    x = X[0]
    return [
        ("binseg_bic_batch", kernels._binseg_bic_batch_loop, kernels._binseg_bic_batch_np, (X, 5, 2, 1e-8)),
        ("binseg_fixed_batch", kernels._binseg_fixed_batch_loop, kernels._binseg_fixed_batch_np, (X, 2, 2)),
        ("pelt_mad_batch", kernels._pelt_mad_batch_loop, kernels._pelt_mad_batch_np, (X, 2, 1e-8)),
        ("rolling_variance", kernels._rolling_variance_loop, kernels._rolling_variance_np, (x, 4)),
        ("kendall_tau", kernels._kendall_tau_loop, kernels._kendall_tau_np, (x,)),
    ]


def grid_seconds(disable):
    env = dict(os.environ, CHANGEPOWER_DISABLE_NUMBA="1" if disable else "0")
    code = (
        "import time; from changepower.power import GridSpec, run_grid; "
        "run_grid(GridSpec(n_values=(10,), es_values=(1.0,), k_values=(1,), reps=2)); "
        "t=time.perf_counter(); run_grid(GridSpec(reps=50), 1); print(time.perf_counter()-t)"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--grid", action="store_true")
    args = ap.parse_args(argv)

    if not kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; only the numpy path can be timed")
        return 1
    print(f"{args.reps} series of length {args.n}, best of {args.repeat}")
    print(f"{'kernel':<20}{'numba s':>10}{'numpy s':>10}{'speedup':>9}  agree")
    for name, fast, slow, call in kernel_cases(args.reps, args.n):
        fast(*call)  # compile
        tf, of = best_of(lambda: fast(*call), args.repeat)
        ts, os_ = best_of(lambda: slow(*call), args.repeat)
        print(f"{name:<20}{tf:>10.4f}{ts:>10.4f}{ts / tf:>9.1f}  {same(of, os_)}")
    if args.grid:
        tn, tp = grid_seconds(False), grid_seconds(True)
        print(f"{'108-cell grid, 50 reps':<20}{tn:>10.3f}{tp:>10.3f}{tp / tn:>9.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
