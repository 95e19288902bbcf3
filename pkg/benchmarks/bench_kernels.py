"""Time the numba and numpy backends of every hot kernel.

    python benchmarks/bench_kernels.py [--repeat 5] [--n 2000]

Both backends are imported from the same module, so the comparison does
not depend on ``HAZARDLAB_DISABLE_NUMBA``; the active default is printed.
"""

import argparse
import time

import numpy as np

from hazardlab import _kernels as K


def best_of(fn, args, repeat):
    fn(*args)  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, rng):
    risk = rng.uniform(size=n)
    t = rng.exponential(30.0, n)
    ev = rng.uniform(size=n) < 0.3
    half = n // 2
    hist = np.bincount(rng.integers(0, 256, 2048 * 2048 // 16), minlength=256).astype(np.float64)
    surv = rng.uniform(size=n)
    return {
        "concordance_sums": (risk, t, ev),
        "auc_pair_sums": (risk[:half], rng.uniform(1, 2, half), risk[half:], rng.uniform(1, 2, n - half)),
        "otsu_scores": (hist,),
        "dcal_histogram": (surv, ev, 10),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=2000)
    args = ap.parse_args(argv)
    print(f"default backend: {K.backend()}  n={args.n}")
    if not K.HAVE_NUMBA:
        print("numba not installed; nothing to compare")
        return 0
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, a in cases(args.n, rng).items():
        t_np = best_of(getattr(K, name + "_numpy"), a, args.repeat)
        t_nb = best_of(getattr(K, name + "_numba"), a, args.repeat)
        print(f"{name:<18} {1e3 * t_np:10.3f} {1e3 * t_nb:10.3f} {t_np / t_nb:8.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
