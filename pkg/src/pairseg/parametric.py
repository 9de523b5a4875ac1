"""Feature-based reconstruction: multinomial-logistic class probabilities,
the inverse-variance reparametrization, and image feature extractors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import _kernels as kn
from .data import AggregatedCounts, ResponseDataset, aggregate_responses
from .errors import ContractViolation
from .grid import GridSpec
from .inference import FitConfig, FitResult, reg_grad, stationarity_report
from .maps import ProbMaps
from .synthesis import bandwidth_to_sigma_r, oriented_kernel_grid


@dataclass(frozen=True)
class FeatureMaps:
    """Per-cell feature vectors, shape (n, n, d)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[0] != v.shape[1]:
            raise ContractViolation(f"expected shape (n, n, d), got {v.shape}")
        if not np.isfinite(v).all():
            raise ContractViolation("feature maps contain non-finite entries")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[2]

    def design_matrix(self) -> np.ndarray:
        """(n*n, d) row-major cell features."""
        return self.values.reshape(-1, self.d)


@dataclass(frozen=True)
class LogisticParams:
    """Softmax weights: omega is (k, d), beta is (k,)."""

    omega: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=np.float64)
        be = np.asarray(self.beta, dtype=np.float64)
        if om.ndim != 2 or be.ndim != 1 or om.shape[0] != be.shape[0]:
            raise ContractViolation(
                f"inconsistent parameter shapes: omega {om.shape}, beta {be.shape}"
            )
        if not (np.isfinite(om).all() and np.isfinite(be).all()):
            raise ContractViolation("parameters contain non-finite entries")
        om = om.copy()
        be = be.copy()
        om.setflags(write=False)
        be.setflags(write=False)
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "beta", be)

    @property
    def k(self) -> int:
        return self.omega.shape[0]

    @property
    def d(self) -> int:
        return self.omega.shape[1]


@dataclass(frozen=True)
class VarianceParams:
    """Per-segment, per-feature tolerated energy scales; sigma is (k, d) > 0."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=np.float64)
        if s.ndim != 2:
            raise ContractViolation(f"expected sigma shape (k, d), got {s.shape}")
        if not np.isfinite(s).all() or (s <= 0).any():
            raise ContractViolation("sigma entries must be finite and > 0")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)

    @property
    def k(self) -> int:
        return self.sigma.shape[0]

    @property
    def d(self) -> int:
        return self.sigma.shape[1]


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logistic_probmaps(params: LogisticParams, features: FeatureMaps) -> ProbMaps:
    """Cell probabilities: softmax over segments of <omega_k, x_i> + beta_k."""
    if params.d != features.d:
        raise ContractViolation(
            f"feature dimension mismatch: params d={params.d}, features d={features.d}"
        )
    z = features.design_matrix() @ params.omega.T + params.beta
    p = _softmax_rows(z)
    n = features.n
    return ProbMaps(p.T.reshape(params.k, n, n).copy())


def variance_reparam(v: VarianceParams) -> LogisticParams:
    """omega_k = -1/sigma_k^2 componentwise, beta = 0."""
    return LogisticParams(omega=-1.0 / v.sigma**2, beta=np.zeros(v.k))


def differential_variance(v: VarianceParams) -> np.ndarray:
    """omega_1 - omega_2 for the two-segment model,
    equal to (sigma_1^2 - sigma_2^2) / (sigma_1^2 sigma_2^2) componentwise.
    """
    if v.k != 2:
        raise ContractViolation(f"differential variance needs k=2, got k={v.k}")
    lp = variance_reparam(v)
    return lp.omega[0] - lp.omega[1]


# ---------------------------------------------------------------------------
# feature extractors
# ---------------------------------------------------------------------------

def _as_float_image(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image)
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255.0
    if img.dtype == np.uint16:
        return img.astype(np.float64) / 65535.0
    return img.astype(np.float64)


def _cell_means(per_pixel: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(H, W) or (H, W, d) pixel values -> (n, n[, d]) cell means."""
    s = per_pixel.shape[0] // grid.n
    if per_pixel.ndim == 2:
        return per_pixel.reshape(grid.n, s, grid.n, s).mean(axis=(1, 3))
    return per_pixel.reshape(grid.n, s, grid.n, s, -1).mean(axis=(1, 3))


def rgb_features(image: np.ndarray, grid: GridSpec) -> FeatureMaps:
    """Per-cell mean RGB in [0, 1], d=3."""
    img = _as_float_image(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ContractViolation(f"expected an (H, W, 3) image, got {img.shape}")
    if img.shape[0] != img.shape[1] or img.shape[0] != grid.image_px:
        raise ContractViolation(
            f"image {img.shape[:2]} does not match grid image_px={grid.image_px}"
        )
    return FeatureMaps(_cell_means(img, grid))


def wavelet_scale_modes(image_px: int, n_scales: int = 4) -> np.ndarray:
    """Radial modes in cycles/px: log-spaced over [px/32, px/4] cycles/image."""
    lo, hi = image_px / 32.0, image_px / 4.0
    return np.geomspace(lo, hi, n_scales) / image_px


def wavelet_energy_features(
    image: np.ndarray,
    grid: GridSpec,
    n_orient: int = 36,
    n_scales: int = 4,
    bandwidth_oct: float = 2.0,
    sigma_theta: float | None = None,
) -> FeatureMaps:
    """Oriented energy features: for each of n_orient bands, filter the image
    with the log-normal radial / oriented angular kernel at every scale,
    square the response, and average over scales and each cell's pixels.
    """
    img = _as_float_image(image)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ContractViolation(f"expected a square grayscale image, got {img.shape}")
    if img.shape[0] != grid.image_px:
        raise ContractViolation(
            f"image side {img.shape[0]} does not match grid image_px={grid.image_px}"
        )
    if n_orient < 2:
        raise ContractViolation("need at least 2 orientation bands")
    if sigma_theta is None:
        sigma_theta = np.pi / n_orient
    px = img.shape[0]
    sigma_r = bandwidth_to_sigma_r(bandwidth_oct)
    modes = wavelet_scale_modes(px, n_scales)
    img_hat = np.fft.fft2(img)
    out = np.empty((grid.n, grid.n, n_orient))
    for m in range(n_orient):
        theta_m = m * np.pi / n_orient
        energy = np.zeros((px, px))
        for r0 in modes:
            kern = oriented_kernel_grid(px, theta_m, sigma_theta, r0, sigma_r)
            resp = np.fft.ifft2(img_hat * kern).real
            energy += resp**2
        energy /= len(modes)
        out[:, :, m] = _cell_means(energy, grid)
    return FeatureMaps(out)


# ---------------------------------------------------------------------------
# parametric fitting
# ---------------------------------------------------------------------------

def _pair_grad_p(vals, ii, jj, kr, no, loss, clamp, lam, kernel, k, n):
    if loss == "bce":
        g = kn.bce_grad_pairs(vals, ii, jj, kr, no, clamp)
    else:
        g = kn.se_grad_pairs(vals, ii, jj, kr, no)
    if lam > 0:
        g = g + reg_grad(vals.T.reshape(k, n, n), lam, kernel).reshape(k, -1).T
    return g


def _pair_loss_p(vals, ii, jj, kr, no, loss, clamp, lam, kernel, k, n):
    if loss == "bce":
        val = kn.bce_loss_pairs(vals, ii, jj, kr, no, clamp)
    else:
        val = kn.se_loss_pairs(vals, ii, jj, kr, no)
    if lam > 0:
        v3 = vals.T.reshape(k, n, n)
        resid = v3 - kn.conv_replicate(v3, kernel)
        val += lam * (resid**2).sum()
    return float(val)


def parametric_objective(
    x: np.ndarray,
    model: str,
    k: int,
    X: np.ndarray,
    ii,
    jj,
    kr,
    no,
    cfg: FitConfig,
    n: int,
    weight_decay: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Loss and gradient in parameter space for the chosen model.

    model="logistic": x packs (omega, beta); model="variance": x packs
    log-sigma (positivity maintained without constraints), beta fixed at 0.
    weight_decay adds a ridge term on omega, pinning feature directions the
    data does not constrain to the minimal-norm solution.
    """
    d = X.shape[1]
    kernel = cfg.kernel()
    if model == "logistic":
        omega = x[: k * d].reshape(k, d)
        beta = x[k * d:]
    else:
        s = x.reshape(k, d)
        omega = -np.exp(-2.0 * s)
        beta = np.zeros(k)
    z = X @ omega.T + beta
    p = _softmax_rows(z)
    vals = np.ascontiguousarray(p)
    loss = _pair_loss_p(vals, ii, jj, kr, no, cfg.loss, cfg.prob_clamp, cfg.lam, kernel, k, n)
    gp = _pair_grad_p(vals, ii, jj, kr, no, cfg.loss, cfg.prob_clamp, cfg.lam, kernel, k, n)
    # softmax backprop: dz = p * (gp - <gp, p> 1)
    inner = (gp * p).sum(axis=1, keepdims=True)
    dz = p * (gp - inner)
    domega = dz.T @ X
    if weight_decay > 0.0:
        loss += weight_decay * float((omega**2).sum())
        domega = domega + 2.0 * weight_decay * omega
    if model == "logistic":
        dbeta = dz.sum(axis=0)
        grad = np.concatenate([domega.ravel(), dbeta])
    else:
        ds = domega * (-2.0 * omega)
        grad = ds.ravel()
    return loss, grad


def fit_parametric(
    d: ResponseDataset | AggregatedCounts,
    features: FeatureMaps,
    k: int,
    cfg: FitConfig | None = None,
    model: str = "logistic",
    n_restarts: int = 5,
    weight_decay: float = 0.0,
) -> tuple[LogisticParams | VarianceParams, FitResult]:
    """Fit the feature model by quasi-Newton descent on the chosen loss.

    Minimizes the configured loss (SE on aggregated same-rates by default)
    composed with the softmax model, plus the spatial penalty when lam > 0.
    Runs n_restarts seeded starts and keeps the best final objective (ties
    to the earliest start); terminates each start when the parameter-space
    gradient norm falls below epsilon or at max_iter. Deterministic per
    cfg.seed.
    """
    if cfg is None:
        cfg = FitConfig()
    if model not in ("logistic", "variance"):
        raise ContractViolation(f"unknown model {model!r}")
    if k < 2:
        raise ContractViolation(f"need k >= 2 segments, got {k}")
    counts = d if isinstance(d, AggregatedCounts) else aggregate_responses(d)
    if len(counts) == 0:
        raise ContractViolation("cannot fit an empty dataset")
    n = features.n
    if isinstance(d, ResponseDataset) and d.grid.n != n:
        raise ContractViolation("feature maps do not match the dataset grid")
    ii, jj, kr, no = counts.arrays()
    if max(int(ii.max()), int(jj.max())) >= n * n:
        raise ContractViolation("pair references a cell outside the feature grid")
    X = features.design_matrix()
    dims = features.d
    n_params = k * dims + k if model == "logistic" else k * dims

    # feature-scale-aware starts: keep initial logits O(1) so the softmax
    # is not saturated regardless of the feature units
    feature_scale = float(np.abs(X).mean()) or 1.0
    seeds = np.random.SeedSequence(cfg.seed).spawn(max(1, n_restarts))
    best = None
    for ss in seeds:
        rng = np.random.default_rng(ss)
        if model == "logistic":
            x0 = np.concatenate(
                [
                    rng.normal(scale=0.3 / (feature_scale * np.sqrt(dims)), size=k * dims),
                    rng.normal(scale=0.01, size=k),
                ]
            )
        else:
            # near-identical per-band starts: directions the data does not
            # constrain then stay flat instead of keeping start-up noise
            x0 = 0.5 * np.log(feature_scale * dims) + rng.normal(
                scale=0.01, size=k * dims
            )
        assert len(x0) == n_params
        f0 = parametric_objective(x0, model, k, X, ii, jj, kr, no, cfg, n,
                                  weight_decay)[0]
        trace: list[float] = []

        def record(xk):
            trace.append(
                parametric_objective(xk, model, k, X, ii, jj, kr, no, cfg, n,
                                     weight_decay)[0]
            )

        # bounds keep exp(-2s) finite for the variance model; the logistic
        # weights are left unbounded
        bounds = None
        if model == "variance":
            bounds = [(x - 12.0, x + 12.0) for x in np.atleast_1d(x0)]
        res = optimize.minimize(
            parametric_objective,
            x0,
            args=(model, k, X, ii, jj, kr, no, cfg, n, weight_decay),
            jac=True,
            method="L-BFGS-B",
            callback=record,
            bounds=bounds,
            options={"maxiter": cfg.max_iter, "gtol": cfg.epsilon, "ftol": 1e-15},
        )
        if best is None or res.fun < best[0].fun - 1e-15:
            best = (res, trace, f0)
    res, trace, f0 = best

    if model == "logistic":
        params = LogisticParams(
            omega=res.x[: k * dims].reshape(k, dims), beta=res.x[k * dims:]
        )
        maps = logistic_probmaps(params, features)
    else:
        sigma = np.exp(res.x.reshape(k, dims))
        params = VarianceParams(sigma=sigma)
        maps = logistic_probmaps(variance_reparam(params), features)

    full_trace = [f0, *trace]
    gap, _ = stationarity_report(maps, counts)
    return params, FitResult(
        maps=maps,
        loss_trace=full_trace,
        iterations=len(full_trace) - 1,
        converged=bool(res.success),
        stationarity_gap=gap,
    )
