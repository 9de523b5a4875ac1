"""Feature models: logistic maps, variance reparametrization, extractors, fits."""

import numpy as np
import pytest

from pairseg.data import AggregatedCounts
from pairseg.errors import ContractViolation
from pairseg.grid import GridSpec
from pairseg.harness import sample_pairset, simulate_responses
from pairseg.inference import FitConfig
from pairseg.maps import argmax_segmap, onehot_maps
from pairseg.parametric import (
    FeatureMaps,
    LogisticParams,
    VarianceParams,
    differential_variance,
    fit_parametric,
    logistic_probmaps,
    parametric_objective,
    rgb_features,
    variance_reparam,
    wavelet_energy_features,
    wavelet_scale_modes,
)
from pairseg.synthesis import MapGenParams, generate_probmaps, synthesize_rgb_clusters



def _features(rng, n, d):
    return FeatureMaps(rng.normal(size=(n, n, d)))


class TestLogisticProbmaps:
    def test_zero_params_uniform(self, rng):
        f = _features(rng, 4, 3)
        p = logistic_probmaps(LogisticParams(np.zeros((3, 3)), np.zeros(3)), f)
        assert np.allclose(p.values, 1 / 3)

    def test_beta_shift_invariance(self, rng):
        f = _features(rng, 4, 2)
        om = rng.normal(size=(3, 2))
        be = rng.normal(size=3)
        a = logistic_probmaps(LogisticParams(om, be), f)
        b = logistic_probmaps(LogisticParams(om, be + 2.7), f)
        assert np.allclose(a.values, b.values, atol=1e-14)

    def test_omega_common_shift_invariance(self, rng):
        f = _features(rng, 4, 2)
        om = rng.normal(size=(3, 2))
        shift = rng.normal(size=2)
        a = logistic_probmaps(LogisticParams(om, np.zeros(3)), f)
        b = logistic_probmaps(LogisticParams(om + shift, np.zeros(3)), f)
        assert np.allclose(a.values, b.values, atol=1e-12)

    def test_scalar_softmax_value(self):
        # K=2, d=1, omega=(1,-1), beta=0, x=0.5: logits (0.5, -0.5)
        f = FeatureMaps(np.full((3, 3, 1), 0.5))
        p = logistic_probmaps(LogisticParams(np.array([[1.0], [-1.0]]), np.zeros(2)), f)
        expected = 1.0 / (1.0 + np.exp(-1.0))  # logistic of the logit gap
        assert p.values[0] == pytest.approx(expected, abs=1e-12)
        assert p.values[0, 0, 0] == pytest.approx(0.7311, abs=1e-4)
        assert p.values[1, 0, 0] == pytest.approx(0.2689, abs=1e-4)

    def test_dimension_mismatch(self, rng):
        f = _features(rng, 4, 3)
        with pytest.raises(ContractViolation):
            logistic_probmaps(LogisticParams(np.zeros((2, 2)), np.zeros(2)), f)

    def test_valid_probmaps(self, rng):
        f = _features(rng, 5, 4)
        params = LogisticParams(rng.normal(size=(4, 4)) * 5, rng.normal(size=4))
        p = logistic_probmaps(params, f)  # constructor checks the invariants
        assert p.k == 4


class TestVarianceReparam:
    def test_unit_sigma(self):
        lp = variance_reparam(VarianceParams(np.ones((2, 3))))
        assert np.allclose(lp.omega, -1.0)
        assert np.allclose(lp.beta, 0.0)

    def test_sigma_two(self):
        lp = variance_reparam(VarianceParams(np.full((2, 1), 2.0)))
        assert np.allclose(lp.omega, -0.25)

    def test_roundtrip(self, rng):
        sigma = rng.uniform(0.5, 3.0, size=(3, 4))
        lp = variance_reparam(VarianceParams(sigma))
        assert np.allclose(-1.0 / lp.omega, sigma**2, rtol=1e-12)

    def test_positivity_required(self):
        with pytest.raises(ContractViolation):
            VarianceParams(np.array([[1.0, -0.5]]))


class TestDifferentialVariance:
    def test_equal_sigmas_zero(self):
        v = VarianceParams(np.ones((2, 5)))
        assert np.allclose(differential_variance(v), 0.0)

    def test_hand_value(self):
        # sigma_1^2 = 2, sigma_2^2 = 1 -> (2-1)/(2*1) = 0.5
        v = VarianceParams(np.array([[np.sqrt(2.0)], [1.0]]))
        assert differential_variance(v)[0] == pytest.approx(0.5, abs=1e-12)

    def test_antisymmetry(self, rng):
        sigma = rng.uniform(0.5, 2.0, size=(2, 6))
        a = differential_variance(VarianceParams(sigma))
        b = differential_variance(VarianceParams(sigma[::-1]))
        assert np.allclose(a, -b, atol=1e-12)

    def test_k_must_be_two(self):
        with pytest.raises(ContractViolation):
            differential_variance(VarianceParams(np.ones((3, 2))))


class TestRgbFeatures:
    def test_constant_red(self):
        g = GridSpec(n=4, image_px=8)
        img = np.zeros((8, 8, 3))
        img[..., 0] = 1.0
        f = rgb_features(img, g)
        assert np.allclose(f.values[..., 0], 1.0)
        assert np.allclose(f.values[..., 1:], 0.0)

    def test_checkerboard(self):
        g = GridSpec(n=4, image_px=8)
        cells = (np.add.outer(np.arange(4), np.arange(4)) % 2).astype(float)
        img = np.repeat(np.repeat(cells, 2, 0), 2, 1)[..., None] * np.ones(3)
        f = rgb_features(img, g)
        assert np.allclose(f.values[..., 0], cells)

    def test_cell_mean(self):
        # a 2x2-pixel cell with half-black half-white pixels averages 0.5
        g = GridSpec(n=3, image_px=6)
        img = np.zeros((6, 6, 3))
        img[0, 0, 0] = 0.0
        img[0, 1, 0] = 0.0
        img[1, 0, 0] = 1.0
        img[1, 1, 0] = 1.0
        f = rgb_features(img, g)
        assert f.values[0, 0, 0] == pytest.approx(0.5)

    def test_uint8_scaling(self):
        g = GridSpec(n=3, image_px=3)
        img = np.full((3, 3, 3), 255, dtype=np.uint8)
        f = rgb_features(img, g)
        assert np.allclose(f.values, 1.0)

    def test_size_mismatch(self):
        g = GridSpec(n=4, image_px=8)
        with pytest.raises(ContractViolation):
            rgb_features(np.zeros((6, 6, 3)), g)


class TestWaveletFeatures:
    def test_white_noise_isotropy(self):
        # Monte-Carlo oracle: 20 seeds at 256^2, band energies near-equal
        g = GridSpec(n=4, image_px=256)
        totals = np.zeros(36)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            img = rng.standard_normal((256, 256))
            f = wavelet_energy_features(img, g)
            totals += f.values.mean(axis=(0, 1))
        assert totals.max() / totals.min() < 1.5

    def test_grating_band_selectivity(self):
        # horizontal grating: wave vector along y = 90 degrees = band 18
        g = GridSpec(n=4, image_px=128)
        y = np.arange(128)
        freq = 16  # cycles per image, inside the scale range [4, 32]
        img = np.cos(2 * np.pi * freq * y / 128)[:, None] * np.ones((1, 128))
        f = wavelet_energy_features(img, g)
        band = int(np.argmax(f.values.mean(axis=(0, 1))))
        assert band == 18

    def test_scale_range(self):
        modes = wavelet_scale_modes(128, 4)
        assert modes[0] == pytest.approx(1 / 32)
        assert modes[-1] == pytest.approx(1 / 4)
        assert len(modes) == 4

    def test_nonsquare_rejected(self):
        g = GridSpec(n=4, image_px=64)
        with pytest.raises(ContractViolation):
            wavelet_energy_features(np.zeros((64, 32)), g)


def _fd_check(model, k, d_feat, rng, n=4, lam=0.0):
    X_full = rng.normal(size=(n, n, d_feat))
    features = FeatureMaps(X_full)
    X = features.design_matrix()
    entries = {}
    while len(entries) < 10:
        i, j = rng.integers(0, n * n, size=2)
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        n_obs = int(rng.integers(1, 6))
        entries[key] = (int(rng.integers(0, n_obs + 1)) / n_obs, n_obs)
    counts = AggregatedCounts(entries=entries)
    ii, jj, kr, no = counts.arrays()
    cfg = FitConfig(lam=lam)
    n_params = k * d_feat + k if model == "logistic" else k * d_feat
    x = rng.normal(scale=0.5, size=n_params)
    loss, grad = parametric_objective(x, model, k, X, ii, jj, kr, no, cfg, n)
    fd = np.zeros_like(x)
    h = 1e-6
    for t in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[t] += h
        xm[t] -= h
        fd[t] = (
            parametric_objective(xp, model, k, X, ii, jj, kr, no, cfg, n)[0]
            - parametric_objective(xm, model, k, X, ii, jj, kr, no, cfg, n)[0]
        ) / (2 * h)
    denom = max(np.linalg.norm(fd), 1e-12)
    return np.linalg.norm(grad - fd) / denom


class TestParametricGradients:
    def test_logistic_gradient_fd(self, rng):
        for _ in range(20):
            assert _fd_check("logistic", 3, 2, rng) < 1e-5

    def test_variance_gradient_fd(self, rng):
        for _ in range(20):
            assert _fd_check("variance", 2, 3, rng) < 1e-5

    def test_logistic_gradient_fd_with_reg(self, rng):
        for _ in range(10):
            assert _fd_check("logistic", 2, 2, rng, lam=2.0) < 1e-5


class TestFitParametric:
    def test_constant_features_give_constant_maps(self, rng):
        g = GridSpec(n=5, image_px=5)
        features = FeatureMaps(np.ones((5, 5, 2)))
        gt = generate_probmaps(MapGenParams(k=2, n=5, sigma_amp=1.0, xi=1.5, seed=0))
        pairs = sample_pairset(g, 2, "k_per_pixel", seed=1)
        d = simulate_responses(gt, pairs, 4, seed=2)
        params, res = fit_parametric(d, features, 2, FitConfig(max_iter=300), n_restarts=2)
        spread = np.ptp(res.maps.values, axis=(1, 2))
        assert spread.max() < 1e-8

    def test_self_consistency_logistic(self, rng):
        # simulate from known params, refit, compare cell probabilities
        n, k, dims = 8, 2, 2
        g = GridSpec(n=n, image_px=n)
        features = FeatureMaps(rng.normal(size=(n, n, dims)))
        gt_params = LogisticParams(np.array([[2.0, -1.0], [-2.0, 1.0]]), np.zeros(k))
        gt_maps = logistic_probmaps(gt_params, features)
        pairs = sample_pairset(g, k, "k_per_pixel", seed=3)
        d = simulate_responses(gt_maps, pairs, 64, seed=4)
        params, res = fit_parametric(d, features, k, FitConfig(max_iter=2000, seed=5))
        mae = np.abs(res.maps.values - gt_maps.values).sum(axis=0).mean()
        swapped = np.abs(res.maps.values[::-1] - gt_maps.values).sum(axis=0).mean()
        assert min(mae, swapped) < 0.05

    def test_deterministic_per_seed(self, rng):
        n, k = 5, 2
        g = GridSpec(n=n, image_px=n)
        features = FeatureMaps(rng.normal(size=(n, n, 2)))
        gt = generate_probmaps(MapGenParams(k=k, n=n, sigma_amp=1.0, xi=1.5, seed=1))
        pairs = sample_pairset(g, k, "k_per_pixel", seed=2)
        d = simulate_responses(gt, pairs, 8, seed=3)
        p1, r1 = fit_parametric(d, features, k, FitConfig(seed=9, max_iter=300), n_restarts=2)
        p2, r2 = fit_parametric(d, features, k, FitConfig(seed=9, max_iter=300), n_restarts=2)
        assert (p1.omega == p2.omega).all()
        assert (r1.maps.values == r2.maps.values).all()

    def test_trace_invariant(self, rng):
        n, k = 5, 2
        g = GridSpec(n=n, image_px=n)
        features = FeatureMaps(rng.normal(size=(n, n, 2)))
        gt = generate_probmaps(MapGenParams(k=k, n=n, sigma_amp=1.0, xi=1.5, seed=1))
        pairs = sample_pairset(g, k, "k_per_pixel", seed=2)
        d = simulate_responses(gt, pairs, 8, seed=3)
        _, res = fit_parametric(d, features, k, FitConfig(seed=9, max_iter=300), n_restarts=1)
        assert len(res.loss_trace) == res.iterations + 1
        assert res.loss_trace[-1] <= res.loss_trace[0]

    def test_rgb_cluster_recovery(self):
        # compact version of the color-cluster study
        n, k = 16, 3
        px = 64
        g = GridSpec(n=n, image_px=px)
        soft = generate_probmaps(MapGenParams(k=k, n=n, sigma_amp=3.0, xi=3.0, seed=2))
        gt = onehot_maps(argmax_segmap(soft).labels, k)
        palette = np.array([[0.85, 0.2, 0.2], [0.2, 0.75, 0.25], [0.2, 0.3, 0.85]])
        img = synthesize_rgb_clusters(gt, palette, noise_sd=0.08, seed=3, image_px=px)
        features = rgb_features(img, g)
        pairs = sample_pairset(g, k, "k_per_pixel", seed=4)
        d = simulate_responses(gt, pairs, 10, seed=5)
        params, res = fit_parametric(
            d, features, k, FitConfig(lam=1.0, max_iter=2000, seed=6)
        )
        fit_labels = argmax_segmap(res.maps).labels
        gt_labels = argmax_segmap(gt).labels
        best = 0
        from itertools import permutations

        for perm in permutations(range(k)):
            best = max(best, (np.asarray(perm)[fit_labels] == gt_labels).mean())
        assert best >= 0.95

    def test_variance_model_k2_gauge(self, rng):
        # fits differing only in gauge produce identical probability maps
        n = 6
        features = FeatureMaps(np.abs(rng.normal(size=(n, n, 3))))
        sigma = rng.uniform(0.5, 2.0, size=(2, 3))
        lp = variance_reparam(VarianceParams(sigma))
        shifted = LogisticParams(lp.omega + np.array([1.3, -0.2, 0.6]), lp.beta + 0.9)
        a = logistic_probmaps(lp, features)
        b = logistic_probmaps(shifted, features)
        assert np.allclose(a.values, b.values, atol=1e-12)
