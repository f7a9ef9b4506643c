"""Benchmark the compiled kernel extension against the pure-numpy fallback.

Run from the repository root:

    python benchmarks/bench_kernels.py [--n 200000] [--repeats 5] [--end-to-end]

The kernel section times the two hot primitives on identical inputs; the
optional end-to-end section re-invokes this script in a subprocess with
VBMA_PURE_PYTHON=1 to time a full probit fit under each backend.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(n, repeats):
    from vbma._kernels import get_backend

    backends = {"pure": get_backend("pure")}
    try:
        backends["compiled"] = get_backend("compiled")
    except ImportError:
        print("compiled extension not built; benchmarking pure backend only")

    rng = np.random.default_rng(0)
    mu = rng.normal(size=n) * 2
    var = np.full(n, 0.7)
    kind = rng.integers(0, 3, size=n)
    a = rng.normal(size=n) * 4
    lower = np.ascontiguousarray(np.where(kind == 0, -np.inf, a))
    upper = np.ascontiguousarray(
        np.where(kind == 0, a, np.where(kind == 1, np.inf, a + rng.uniform(0.001, 3, n)))
    )

    y = rng.poisson(5.0, size=n).astype(np.float64)
    eta = np.log(y + 0.5) + rng.normal(size=n) * 0.3

    rows = []
    for name, mod in backends.items():
        t_tn = _time(lambda: mod.tn_moments(mu, var, lower, upper), repeats)
        def run_pln():
            m = np.log(y + 0.5)
            s = np.ones(n)
            mod.pln_newton(y, eta, 2.0, m, s, 50, 1e-10)
        t_pln = _time(run_pln, repeats)
        rows.append((name, t_tn, t_pln))

    print(f"\nkernel timings, n={n}, best of {repeats}")
    print(f"{'backend':<10} {'tn_moments':>12} {'pln_newton':>12}")
    for name, t_tn, t_pln in rows:
        print(f"{name:<10} {t_tn * 1e3:>10.2f}ms {t_pln * 1e3:>10.2f}ms")
    if len(rows) == 2:
        base = {r[0]: r for r in rows}
        print(f"{'speedup':<10} {base['pure'][1] / base['compiled'][1]:>11.2f}x "
              f"{base['pure'][2] / base['compiled'][2]:>11.2f}x")


def bench_fit(n):
    from vbma import BACKEND_NAME, FitConfig, ModelIndex, SimDesign, run_cavi, simulate

    design = SimDesign(family="probit", n=n, p=10, seed=1,
                       beta_true=(0.5, -0.5, 0.25, -0.25, 0, 0, 0, 0, 0, 0))
    ds, _ = simulate(design)
    t0 = time.perf_counter()
    result = run_cavi(ds, ModelIndex.full(10), FitConfig())
    dt = time.perf_counter() - t0
    print(f"end-to-end probit fit n={n} backend={BACKEND_NAME}: "
          f"{dt * 1e3:.0f}ms ({result.iters} sweeps)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200000)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--end-to-end", action="store_true")
    parser.add_argument("--fit-only", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.fit_only:
        bench_fit(args.n)
        return

    bench_kernels(args.n, args.repeats)
    if args.end_to_end:
        print()
        sys.stdout.flush()
        for env_val in ("", "1"):
            env = dict(os.environ)
            if env_val:
                env["VBMA_PURE_PYTHON"] = env_val
            else:
                env.pop("VBMA_PURE_PYTHON", None)
            subprocess.run(
                [sys.executable, __file__, "--fit-only", "--n", str(args.n)],
                env=env,
                check=True,
            )


if __name__ == "__main__":
    main()
