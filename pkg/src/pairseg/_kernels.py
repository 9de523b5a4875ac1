"""Hot numeric kernels: pair losses/gradients and the replicate-padded convolution.

Each kernel has two implementations: a numba @njit loop and a vectorized
numpy fallback. The active path is chosen at import time; set
``PAIRSEG_DISABLE_NUMBA=1`` to force the numpy fallback (the two agree to
floating-point accumulation order). ``benchmarks/bench_kernels.py`` compares
their throughput.
"""

from __future__ import annotations

import os

import numpy as np
from scipy import ndimage, signal

_DISABLED = os.environ.get("PAIRSEG_DISABLE_NUMBA", "").lower() in {"1", "true", "yes"}
HAVE_NUMBA = False
if not _DISABLED:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def pair_dots_np(values: np.ndarray, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
    """<p_i, p_j> for each pair; values is (cells, k)."""
    return np.einsum("mk,mk->m", values[ii], values[jj])


def bce_loss_np(values, ii, jj, k_rate, n_obs, clamp) -> float:
    q = np.clip(pair_dots_np(values, ii, jj), clamp, 1.0 - clamp)
    terms = -n_obs * (k_rate * np.log(q) + (1.0 - k_rate) * np.log1p(-q))
    return float(terms.sum())


def se_loss_np(values, ii, jj, k_rate, n_obs) -> float:
    q = pair_dots_np(values, ii, jj)
    return float(((k_rate - q) ** 2).sum())


def _scatter_pair_grad(values, ii, jj, coef) -> np.ndarray:
    cells, k = values.shape
    grad = np.zeros_like(values)
    for c in range(k):
        grad[:, c] = np.bincount(ii, weights=coef * values[jj, c], minlength=cells)
        grad[:, c] += np.bincount(jj, weights=coef * values[ii, c], minlength=cells)
    return grad


def bce_grad_np(values, ii, jj, k_rate, n_obs, clamp) -> np.ndarray:
    q = np.clip(pair_dots_np(values, ii, jj), clamp, 1.0 - clamp)
    coef = -n_obs * (k_rate / q - (1.0 - k_rate) / (1.0 - q))
    return _scatter_pair_grad(values, ii, jj, coef)


def se_grad_np(values, ii, jj, k_rate, n_obs) -> np.ndarray:
    q = pair_dots_np(values, ii, jj)
    coef = -2.0 * (k_rate - q)
    return _scatter_pair_grad(values, ii, jj, coef)


def conv_replicate_np(maps: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """Convolve each (n, n) map with a symmetric kernel, replicating edges."""
    out = np.empty_like(maps)
    for k in range(maps.shape[0]):
        out[k] = ndimage.convolve(maps[k], kern, mode="nearest")
    return out


def _fold_replicate_axis(z: np.ndarray, w: int, axis: int) -> np.ndarray:
    """Adjoint of replicate padding along one axis: fold borders into edges."""
    z = np.moveaxis(z, axis, 0)
    n = z.shape[0] - 2 * w
    out = z[w:w + n].copy()
    out[0] += z[:w].sum(axis=0)
    out[-1] += z[w + n:].sum(axis=0)
    return np.moveaxis(out, 0, axis)


def conv_replicate_adjoint_np(maps: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """Transpose of conv_replicate_np as a linear operator on each map."""
    w = kern.shape[0] // 2
    out = np.empty_like(maps)
    for k in range(maps.shape[0]):
        full = signal.convolve2d(maps[k], kern, mode="full")
        folded = _fold_replicate_axis(full, w, 0)
        out[k] = _fold_replicate_axis(folded, w, 1)
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def pair_dots_nb(values, ii, jj):
        m = ii.shape[0]
        k = values.shape[1]
        out = np.empty(m)
        for t in range(m):
            acc = 0.0
            for c in range(k):
                acc += values[ii[t], c] * values[jj[t], c]
            out[t] = acc
        return out

    @njit(cache=True)
    def bce_loss_nb(values, ii, jj, k_rate, n_obs, clamp):
        m = ii.shape[0]
        k = values.shape[1]
        loss = 0.0
        for t in range(m):
            q = 0.0
            for c in range(k):
                q += values[ii[t], c] * values[jj[t], c]
            if q < clamp:
                q = clamp
            elif q > 1.0 - clamp:
                q = 1.0 - clamp
            loss += -n_obs[t] * (k_rate[t] * np.log(q) + (1.0 - k_rate[t]) * np.log1p(-q))
        return loss

    @njit(cache=True)
    def se_loss_nb(values, ii, jj, k_rate, n_obs):
        m = ii.shape[0]
        k = values.shape[1]
        loss = 0.0
        for t in range(m):
            q = 0.0
            for c in range(k):
                q += values[ii[t], c] * values[jj[t], c]
            r = k_rate[t] - q
            loss += r * r
        return loss

    @njit(cache=True)
    def bce_grad_nb(values, ii, jj, k_rate, n_obs, clamp):
        m = ii.shape[0]
        k = values.shape[1]
        grad = np.zeros_like(values)
        for t in range(m):
            i = ii[t]
            j = jj[t]
            q = 0.0
            for c in range(k):
                q += values[i, c] * values[j, c]
            if q < clamp:
                q = clamp
            elif q > 1.0 - clamp:
                q = 1.0 - clamp
            coef = -n_obs[t] * (k_rate[t] / q - (1.0 - k_rate[t]) / (1.0 - q))
            for c in range(k):
                grad[i, c] += coef * values[j, c]
                grad[j, c] += coef * values[i, c]
        return grad

    @njit(cache=True)
    def se_grad_nb(values, ii, jj, k_rate, n_obs):
        m = ii.shape[0]
        k = values.shape[1]
        grad = np.zeros_like(values)
        for t in range(m):
            i = ii[t]
            j = jj[t]
            q = 0.0
            for c in range(k):
                q += values[i, c] * values[j, c]
            coef = -2.0 * (k_rate[t] - q)
            for c in range(k):
                grad[i, c] += coef * values[j, c]
                grad[j, c] += coef * values[i, c]
        return grad

    @njit(cache=True)
    def conv_replicate_nb(maps, kern):
        nk, n, _ = maps.shape
        w = kern.shape[0] // 2
        out = np.zeros_like(maps)
        for k in range(nk):
            for r in range(n):
                for c in range(n):
                    acc = 0.0
                    for dr in range(-w, w + 1):
                        rr = min(max(r + dr, 0), n - 1)
                        for dc in range(-w, w + 1):
                            cc = min(max(c + dc, 0), n - 1)
                            acc += kern[dr + w, dc + w] * maps[k, rr, cc]
                    out[k, r, c] = acc
        return out

    @njit(cache=True)
    def conv_replicate_adjoint_nb(maps, kern):
        nk, n, _ = maps.shape
        w = kern.shape[0] // 2
        out = np.zeros_like(maps)
        for k in range(nk):
            for r in range(n):
                for c in range(n):
                    v = maps[k, r, c]
                    for dr in range(-w, w + 1):
                        rr = min(max(r + dr, 0), n - 1)
                        for dc in range(-w, w + 1):
                            cc = min(max(c + dc, 0), n - 1)
                            out[k, rr, cc] += kern[dr + w, dc + w] * v
        return out


# Active path.
if HAVE_NUMBA:
    BACKEND = "numba"
    pair_dots = pair_dots_nb
    bce_loss_pairs = bce_loss_nb
    se_loss_pairs = se_loss_nb
    bce_grad_pairs = bce_grad_nb
    se_grad_pairs = se_grad_nb
    conv_replicate = conv_replicate_nb
    conv_replicate_adjoint = conv_replicate_adjoint_nb
else:
    BACKEND = "numpy"
    pair_dots = pair_dots_np
    bce_loss_pairs = bce_loss_np
    se_loss_pairs = se_loss_np
    bce_grad_pairs = bce_grad_np
    se_grad_pairs = se_grad_np
    conv_replicate = conv_replicate_np
    conv_replicate_adjoint = conv_replicate_adjoint_np
