"""Time the numba and pure-numpy backends of the hot kernels on identical inputs.

    python benchmarks/bench_kernels.py [--n 2000] [--reps 20000] [--repeat 3]

Each kernel runs once per backend before timing so JIT compilation is not
counted. The best of ``--repeat`` runs is reported.
"""

import argparse
import time

import numpy as np
from scipy import special

from cpsm import _accel, kernels
from cpsm.models import log_block_weights
from cpsm.specfn import scaled_gfc_log_table


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(n, reps, seed=0):
    rng = np.random.default_rng(seed)
    crp_n = 200
    u_crp = rng.random((reps, crp_n - 1))
    theta = np.full(reps, 1.0)
    cap = np.full(reps, crp_n)
    comp_n = 60
    ks = rng.integers(1, comp_n + 1, reps)
    u_comp = rng.random((reps, comp_n))
    comp_args = (scaled_gfc_log_table(0.5, comp_n), log_block_weights(0.5, comp_n),
                 special.gammaln(np.arange(comp_n + 1) + 1.0), ks, comp_n, u_comp)
    return {
        f"gfc table n={n}": lambda b: kernels.log_scaled_gfc_table(0.5, n, backend=b),
        f"crp n={crp_n} reps={reps}": lambda b: kernels.crp_kernel(0.5, theta, cap, crp_n, u_crp, backend=b),
        f"compose n={comp_n} reps={reps}": lambda b: kernels.compose_kernel(*comp_args, backend=b),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--reps", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':<32}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for name, fn in cases(args.n, args.reps).items():
        for backend in ("numba", "numpy"):
            fn(backend)
        t_numba = best_of(lambda: fn("numba"), args.repeat)
        t_numpy = best_of(lambda: fn("numpy"), args.repeat)
        print(f"{name:<32}{t_numba:>10.4f}{t_numpy:>10.4f}{t_numpy / t_numba:>8.1f}x")


if __name__ == "__main__":
    main()
