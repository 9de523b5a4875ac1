"""Objectives, analytic gradients, and the multiplicative-update solver.

The non-parametric reconstruction treats each cell's probability vector as a
free point on the simplex and minimizes either the Bernoulli negative
log-likelihood (BCE) of the raw responses or the squared error (SE) between
model pair probabilities and the empirical same-rates, optionally with a
spatial penalty on deviation from the local neighbor average.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as kn
from .data import AggregatedCounts, ResponseDataset, aggregate_responses
from .errors import ContractViolation, FitDiverged
from .maps import ProbMaps

#: iterations without a new best objective before the step size is halved
_GUARD_STREAK = 20
#: step-size halvings allowed before the fit is abandoned; strongly
#: regularized runs need several to bring the default rate into the
#: stable range for the penalty's curvature
_GUARD_MAX_HALVINGS = 10
#: bound on the multiplicative-update exponent; BCE gradients scale with
#: 1/prob_clamp near simplex corners and would overflow exp() unchecked.
#: Near any optimum gradients are small, so the cap never binds there.
_EXP_CAP = 5.0


def neighbor_kernel(width: int = 1) -> np.ndarray:
    """Neighbor-averaging kernel for the spatial penalty; weights sum to 1.

    width=1 is the 4-neighbor cross with weight 1/4 each; width>=2 is the
    uniform (2w+1)^2 square excluding the center.
    """
    if width < 1:
        raise ContractViolation(f"kernel width must be >= 1, got {width}")
    size = 2 * width + 1
    if width == 1:
        kern = np.zeros((3, 3))
        kern[0, 1] = kern[2, 1] = kern[1, 0] = kern[1, 2] = 0.25
        return kern
    kern = np.full((size, size), 1.0 / (size * size - 1))
    kern[width, width] = 0.0
    return kern


@dataclass(frozen=True)
class FitConfig:
    """Solver settings; defaults follow the desk-scale calibration."""

    loss: str = "se"  # "bce" | "se"
    lam: float = 0.0
    kernel_width: int = 1
    learning_rate: float = 0.5
    epsilon: float = 1e-8
    max_iter: int = 5000
    seed: int = 0
    prob_clamp: float = 1e-7
    # smallest value a cell probability may take between iterations; keeps
    # components escapable (multiplicative updates otherwise lock at
    # floating-point underflow). 0 disables.
    iterate_floor: float = 1e-9

    def __post_init__(self):
        if self.loss not in ("bce", "se"):
            raise ContractViolation(f"loss must be 'bce' or 'se', got {self.loss!r}")
        if self.lam < 0:
            raise ContractViolation("lam must be >= 0")
        if self.learning_rate <= 0:
            raise ContractViolation("learning_rate must be > 0")
        if self.epsilon <= 0:
            raise ContractViolation("epsilon must be > 0")
        if self.max_iter < 1:
            raise ContractViolation("max_iter must be >= 1")
        if not 0.0 < self.prob_clamp < 0.5:
            raise ContractViolation("prob_clamp must lie in (0, 0.5)")
        if self.kernel_width < 1:
            raise ContractViolation("kernel_width must be >= 1")
        if not 0.0 <= self.iterate_floor < 0.1:
            raise ContractViolation("iterate_floor must lie in [0, 0.1)")

    def with_seed(self, seed: int) -> "FitConfig":
        return replace(self, seed=seed)

    def kernel(self) -> np.ndarray:
        return neighbor_kernel(self.kernel_width)


@dataclass(frozen=True)
class FitResult:
    """Fitted maps plus the optimization record."""

    maps: ProbMaps
    loss_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    stationarity_gap: float = float("nan")


def _check_pairs_in_grid(counts: AggregatedCounts, n_cells: int) -> None:
    for (i, j) in counts.entries:
        if not (0 <= i < n_cells and 0 <= j < n_cells):
            raise ContractViolation(
                f"pair ({i}, {j}) references a cell outside the {n_cells}-cell grid"
            )


def _as_counts(d: ResponseDataset | AggregatedCounts) -> AggregatedCounts:
    if isinstance(d, AggregatedCounts):
        return d
    return aggregate_responses(d)


def bce_loss(p: ProbMaps, d: ResponseDataset | AggregatedCounts, prob_clamp: float = 1e-7) -> float:
    """Summed Bernoulli negative log-likelihood over all trials.

    Pair probabilities are clamped to [prob_clamp, 1-prob_clamp] before the
    logs so deterministic iterates stay finite.
    """
    counts = _as_counts(d)
    _check_pairs_in_grid(counts, p.n_cells)
    ii, jj, kr, no = counts.arrays()
    if len(ii) == 0:
        return 0.0
    return float(kn.bce_loss_pairs(np.ascontiguousarray(p.flat()), ii, jj, kr, no, prob_clamp))


def se_loss(p: ProbMaps, counts: AggregatedCounts | ResponseDataset) -> float:
    """Squared error between empirical same-rates and model pair probabilities."""
    counts = _as_counts(counts)
    _check_pairs_in_grid(counts, p.n_cells)
    ii, jj, kr, no = counts.arrays()
    if len(ii) == 0:
        return 0.0
    return float(kn.se_loss_pairs(np.ascontiguousarray(p.flat()), ii, jj, kr, no))


def reg_penalty(p: ProbMaps | np.ndarray, lam: float, kernel: np.ndarray) -> float:
    """lam * sum of squared deviations from the kernel-weighted neighbor average."""
    if lam < 0:
        raise ContractViolation("lam must be >= 0")
    if abs(kernel.sum() - 1.0) > 1e-9:
        raise ContractViolation("kernel weights must sum to 1")
    if lam == 0.0:
        return 0.0
    vals = np.asarray(getattr(p, "values", p), dtype=np.float64)
    resid = vals - kn.conv_replicate(vals, kernel)
    return float(lam * (resid ** 2).sum())


def reg_grad(values3d: np.ndarray, lam: float, kernel: np.ndarray) -> np.ndarray:
    """Gradient of reg_penalty: 2*lam*(I - C)^T (I - C) applied to the maps."""
    resid = values3d - kn.conv_replicate(values3d, kernel)
    return 2.0 * lam * (resid - kn.conv_replicate_adjoint(resid, kernel))


def grad_bce(p: ProbMaps, d: ResponseDataset | AggregatedCounts, prob_clamp: float = 1e-7) -> np.ndarray:
    """Analytic gradient of bce_loss with respect to every cell vector, (k, n, n)."""
    counts = _as_counts(d)
    _check_pairs_in_grid(counts, p.n_cells)
    ii, jj, kr, no = counts.arrays()
    if len(ii) == 0:
        return np.zeros_like(p.values)
    g = kn.bce_grad_pairs(np.ascontiguousarray(p.flat()), ii, jj, kr, no, prob_clamp)
    return g.T.reshape(p.values.shape)


def grad_se(
    p: ProbMaps,
    counts: AggregatedCounts | ResponseDataset,
    lam: float = 0.0,
    kernel: np.ndarray | None = None,
) -> np.ndarray:
    """Analytic gradient of se_loss, plus the penalty gradient when lam > 0."""
    counts = _as_counts(counts)
    _check_pairs_in_grid(counts, p.n_cells)
    ii, jj, kr, no = counts.arrays()
    if len(ii) == 0:
        g = np.zeros_like(p.values)
    else:
        g2 = kn.se_grad_pairs(np.ascontiguousarray(p.flat()), ii, jj, kr, no)
        g = g2.T.reshape(p.values.shape)
    if lam > 0.0:
        if kernel is None:
            kernel = neighbor_kernel()
        g = g + reg_grad(p.values, lam, kernel)
    return g


def init_values(k: int, n_cells: int, seed: int, jitter: float = 1e-3) -> np.ndarray:
    """Uniform 1/k start plus seeded jitter, renormalized; shape (cells, k)."""
    rng = np.random.default_rng(seed)
    vals = 1.0 / k + jitter * (2.0 * rng.random((n_cells, k)) - 1.0)
    vals /= vals.sum(axis=1, keepdims=True)
    return vals


def fit_nonparametric(
    d: ResponseDataset | AggregatedCounts,
    k: int,
    cfg: FitConfig | None = None,
    n: int | None = None,
    iterate_callback=None,
    n_restarts: int = 1,
    init: ProbMaps | None = None,
) -> FitResult:
    """Reconstruct probabilistic maps by exponentiated gradient descent.

    Each step multiplies the maps by exp(-learning_rate * gradient) and
    renormalizes every cell, which keeps all iterates on the simplex. Stops
    when the objective changes by at most epsilon between iterations, or at
    max_iter. A guard halves the step size and restarts from the best
    iterate whenever _GUARD_STREAK iterations pass without improving the
    best objective, and gives up (converged=False) after
    _GUARD_MAX_HALVINGS halvings. The returned maps are the best-objective
    iterate (identical to the last one on monotone runs). Deterministic for
    a fixed config.

    n_restarts > 1 reruns the descent from fresh seeded initializations
    (seeds derived from cfg.seed) and keeps the best final objective, ties
    resolved toward the earliest restart; multiplicative updates can trap
    single runs in corner-locked local minima on hard instances. An
    explicit init (e.g. a previous fit's maps, for annealing protocols)
    replaces the seeded uniform-plus-jitter start.
    """
    if n_restarts > 1 and init is None:
        seeds = [
            int(s.generate_state(1)[0])
            for s in np.random.SeedSequence(cfg.seed if cfg else 0).spawn(n_restarts)
        ]
        best: FitResult | None = None
        best_val = np.inf
        for restart_seed in seeds:
            sub = (cfg or FitConfig()).with_seed(restart_seed)
            res = fit_nonparametric(d, k, sub, n=n, iterate_callback=iterate_callback)
            val = min(res.loss_trace)
            if best is None or val < best_val - 1e-15:
                best = res
                best_val = val
        return best
    if cfg is None:
        cfg = FitConfig()
    if k < 2:
        raise ContractViolation(f"need k >= 2 segments, got {k}")
    counts = _as_counts(d)
    if len(counts) == 0:
        raise ContractViolation("cannot fit an empty dataset")
    if isinstance(d, ResponseDataset):
        n = d.grid.n
    elif n is None:
        raise ContractViolation("pass the grid side n when fitting raw aggregated counts")
    n_cells = n * n
    _check_pairs_in_grid(counts, n_cells)
    ii, jj, kr, no = counts.arrays()
    kernel = cfg.kernel()
    use_bce = cfg.loss == "bce"

    def data_loss(v2d: np.ndarray) -> float:
        if use_bce:
            return kn.bce_loss_pairs(v2d, ii, jj, kr, no, cfg.prob_clamp)
        return kn.se_loss_pairs(v2d, ii, jj, kr, no)

    def data_grad(v2d: np.ndarray) -> np.ndarray:
        if use_bce:
            return kn.bce_grad_pairs(v2d, ii, jj, kr, no, cfg.prob_clamp)
        return kn.se_grad_pairs(v2d, ii, jj, kr, no)

    def total_loss(v2d: np.ndarray) -> float:
        loss = data_loss(v2d)
        if cfg.lam > 0:
            v3d = v2d.T.reshape(k, n, n)
            resid = v3d - kn.conv_replicate(v3d, kernel)
            loss += cfg.lam * (resid ** 2).sum()
        return float(loss)

    if init is not None:
        if init.k != k or init.n_cells != n_cells:
            raise ContractViolation("init maps do not match the requested fit shape")
        vals = np.ascontiguousarray(init.flat()).copy()
        if cfg.iterate_floor > 0.0:
            np.maximum(vals, cfg.iterate_floor, out=vals)
            vals /= vals.sum(axis=1, keepdims=True)
    else:
        vals = init_values(k, n_cells, cfg.seed)
    lr = cfg.learning_rate
    if use_bce and len(no) > 0:
        # the BCE gradient scales with the observations behind each rate;
        # normalizing keeps the step size meaningful across block counts
        lr /= max(1.0, float(no.mean()))
    loss_prev = total_loss(vals)
    trace = [loss_prev]
    if not np.isfinite(loss_prev):
        raise FitDiverged(f"initial loss is not finite: {loss_prev}")

    converged = False
    stall = 0
    halvings = 0
    iterations = 0
    best_loss = loss_prev
    best_vals = vals.copy()
    for _ in range(cfg.max_iter):
        grad = data_grad(vals)
        if cfg.lam > 0:
            v3d = vals.T.reshape(k, n, n)
            rg = reg_grad(v3d, cfg.lam, kernel)
            grad = grad + rg.reshape(k, -1).T
        vals = vals * np.exp(np.clip(-lr * grad, -_EXP_CAP, _EXP_CAP))
        vals /= vals.sum(axis=1, keepdims=True)
        if cfg.iterate_floor > 0.0:
            np.maximum(vals, cfg.iterate_floor, out=vals)
            vals /= vals.sum(axis=1, keepdims=True)
        loss_new = total_loss(vals)
        iterations += 1
        trace.append(loss_new)
        if iterate_callback is not None:
            iterate_callback(vals)
        if not np.isfinite(loss_new):
            raise FitDiverged(
                f"loss became non-finite at iteration {iterations} "
                f"(lr={lr}, loss={cfg.loss}, lam={cfg.lam})"
            )
        if abs(loss_new - loss_prev) <= cfg.epsilon:
            loss_prev = loss_new
            if loss_new < best_loss:
                best_loss = loss_new
                best_vals = vals.copy()
            converged = True
            break
        if loss_new < best_loss:
            best_loss = loss_new
            best_vals = vals.copy()
            stall = 0
        else:
            stall += 1
            if stall >= _GUARD_STREAK:
                if halvings < _GUARD_MAX_HALVINGS:
                    lr *= 0.5
                    halvings += 1
                    vals = best_vals.copy()
                    loss_new = best_loss
                    stall = 0
                else:
                    loss_prev = loss_new
                    break
        loss_prev = loss_new

    maps = ProbMaps(best_vals.T.reshape(k, n, n).copy())
    gap, _ = stationarity_report(maps, counts)
    return FitResult(
        maps=maps,
        loss_trace=trace,
        iterations=iterations,
        converged=converged,
        stationarity_gap=gap,
    )


def fit_annealed(
    d: ResponseDataset | AggregatedCounts,
    k: int,
    cfg: FitConfig | None = None,
    lam_anneal: float = 10.0,
    n: int | None = None,
) -> FitResult:
    """Two-stage fit: a strongly smoothed pass, then the configured fit
    warm-started from it.

    At the minimal pair budget the plain descent freezes into mixed
    label-convention minima; the smoothing stage synchronizes one
    convention across the grid and the second stage removes the smoothing
    bias. The returned record (trace, iterations) is the second stage's.
    """
    cfg = cfg or FitConfig()
    stage1 = fit_nonparametric(d, k, replace(cfg, lam=lam_anneal), n=n)
    return fit_nonparametric(d, k, cfg, n=n, init=stage1.maps)


def stationarity_report(
    p: ProbMaps, counts: AggregatedCounts
) -> tuple[float, dict[tuple[int, int], float]]:
    """Per-pair |<p_i, p_j> - k_rate| and its maximum over observed pairs.

    At a stationary point of either loss with linearly independent tested
    families, every gap vanishes; this is the numerical check of that fact.
    """
    ii, jj, kr, _ = counts.arrays()
    if len(ii) == 0:
        return 0.0, {}
    q = kn.pair_dots(np.ascontiguousarray(p.flat()), ii, jj)
    gaps = np.abs(q - kr)
    per_pair = {
        (int(a), int(b)): float(g) for a, b, g in zip(ii, jj, gaps)
    }
    return float(gaps.max()), per_pair
