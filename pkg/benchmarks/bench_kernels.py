"""Throughput comparison of the numba kernels against the numpy fallbacks.

Usage:
    python benchmarks/bench_kernels.py [--pairs 2400] [--cells 400] [--k 3]

Times the pair-loss/gradient kernels and a full nonparametric fit through
both paths. The numpy path is what you get with PAIRSEG_DISABLE_NUMBA=1.
"""

import argparse
import time

import numpy as np

from pairseg import _kernels as kn
from pairseg.grid import GridSpec
from pairseg.harness import sample_pairset, simulate_responses
from pairseg.inference import FitConfig, fit_nonparametric, neighbor_kernel
from pairseg.synthesis import MapGenParams, generate_probmaps


def _time(fn, *args, repeat=50):
    fn(*args)  # warm-up (JIT compilation on the numba path)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernels(cells: int, k: int, n_pairs: int) -> None:
    rng = np.random.default_rng(0)
    vals = np.ascontiguousarray(rng.dirichlet(np.ones(k), size=cells))
    ii = rng.integers(0, cells, size=n_pairs).astype(np.int64)
    jj = (ii + 1 + rng.integers(0, cells - 1, size=n_pairs)) % cells
    n_obs = rng.integers(1, 11, size=n_pairs).astype(np.float64)
    k_rate = rng.integers(0, n_obs + 1) / n_obs
    n = int(np.sqrt(cells))
    maps = rng.random((k, n, n))
    kern = neighbor_kernel(1)

    rows = [
        ("se loss", kn.se_loss_np, (vals, ii, jj, k_rate, n_obs)),
        ("se grad", kn.se_grad_np, (vals, ii, jj, k_rate, n_obs)),
        ("bce loss", kn.bce_loss_np, (vals, ii, jj, k_rate, n_obs, 1e-7)),
        ("bce grad", kn.bce_grad_np, (vals, ii, jj, k_rate, n_obs, 1e-7)),
        ("conv", kn.conv_replicate_np, (maps, kern)),
        ("conv adjoint", kn.conv_replicate_adjoint_np, (maps, kern)),
    ]
    numba_fns = {}
    if kn.HAVE_NUMBA:
        numba_fns = {
            "se loss": kn.se_loss_nb,
            "se grad": kn.se_grad_nb,
            "bce loss": kn.bce_loss_nb,
            "bce grad": kn.bce_grad_nb,
            "conv": kn.conv_replicate_nb,
            "conv adjoint": kn.conv_replicate_adjoint_nb,
        }

    print(f"kernels: {cells} cells, k={k}, {n_pairs} pairs")
    print(f"{'kernel':14s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, np_fn, args in rows:
        t_np = _time(np_fn, *args)
        if numba_fns:
            t_nb = _time(numba_fns[name], *args)
            print(f"{name:14s} {t_np * 1e6:9.1f}u {t_nb * 1e6:9.1f}u {t_np / t_nb:7.1f}x")
        else:
            print(f"{name:14s} {t_np * 1e6:9.1f}u {'n/a':>10s} {'':>8s}")


def bench_full_fit(n: int, k: int) -> None:
    gt = generate_probmaps(MapGenParams(k=k, n=n, sigma_amp=0.7, xi=2.5, seed=0))
    grid = GridSpec(n=n, image_px=n)
    pairs = sample_pairset(grid, k, "k_per_pixel", seed=1)
    d = simulate_responses(gt, pairs, 10, seed=2)
    cfg = FitConfig(lam=10.0, max_iter=2000, seed=3)

    def run():
        return fit_nonparametric(d, k, cfg)

    active = kn.BACKEND
    t_active = _time(run, repeat=3)
    print(f"\nfull fit (n={n}, k={k}, {len(pairs)} pairs, lam=10): "
          f"{active} path {t_active * 1e3:.0f} ms")

    if kn.HAVE_NUMBA:
        saved = {
            name: getattr(kn, name)
            for name in ("pair_dots", "bce_loss_pairs", "se_loss_pairs",
                         "bce_grad_pairs", "se_grad_pairs",
                         "conv_replicate", "conv_replicate_adjoint")
        }
        try:
            kn.pair_dots = kn.pair_dots_np
            kn.bce_loss_pairs = kn.bce_loss_np
            kn.se_loss_pairs = kn.se_loss_np
            kn.bce_grad_pairs = kn.bce_grad_np
            kn.se_grad_pairs = kn.se_grad_np
            kn.conv_replicate = kn.conv_replicate_np
            kn.conv_replicate_adjoint = kn.conv_replicate_adjoint_np
            t_numpy = _time(run, repeat=3)
        finally:
            for name, fn in saved.items():
                setattr(kn, name, fn)
        print(f"full fit numpy fallback: {t_numpy * 1e3:.0f} ms "
              f"({t_numpy / t_active:.1f}x slower)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cells", type=int, default=400)
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--pairs", type=int, default=2400)
    args = parser.parse_args()
    print(f"active kernel path: {kn.BACKEND}")
    bench_kernels(args.cells, args.k, args.pairs)
    bench_full_fit(int(np.sqrt(args.cells)), args.k)


if __name__ == "__main__":
    main()
