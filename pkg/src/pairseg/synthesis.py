"""Ground-truth generation: probabilistic maps, oriented textures, RGB clusters.

Probabilistic maps come from exponentiating independent Gaussian random
fields (white noise smoothed in the Fourier domain). Oriented textures are
white noise filtered by a log-normal radial / von-Mises-like angular kernel
whose local orientation follows the probability-weighted blend of the two
segment orientations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ContractViolation
from .grid import lattice_coords
from .maps import ProbMaps

#: pixel-domain std of the Gaussian used to soften maps before texturing
MAP_SMOOTHING_PX = 2.5
#: mid-gray of the 8-bit gray-level scale textures are expressed in
MEAN_GRAY = 127.5


@dataclass(frozen=True)
class MapGenParams:
    """Gaussian-field map generator settings.

    sigma_amp scales the field amplitude: large values saturate the maps
    toward 0/1 (low uncertainty), small values flatten them toward 1/k.
    xi is the correlation length in cells and sets the segment size.
    """

    k: int
    n: int
    sigma_amp: float
    xi: float
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ContractViolation("need k >= 2 segments")
        if self.n < 3:
            raise ContractViolation("need n >= 3")
        if self.sigma_amp <= 0 or self.xi <= 0:
            raise ContractViolation("sigma_amp and xi must be positive")


def gaussian_smoothing_kernel(sigma_amp: float, xi: float, n: int) -> np.ndarray:
    """Field-smoothing kernel sigma^2 * exp(-|i|^2 / (2 xi^2)) on the lattice."""
    if sigma_amp <= 0 or xi <= 0:
        raise ContractViolation("sigma_amp and xi must be positive")
    c = lattice_coords(n)
    d2 = c[:, None] ** 2 + c[None, :] ** 2
    return sigma_amp**2 * np.exp(-d2 / (2.0 * xi**2))


def generate_probmaps(params: MapGenParams) -> ProbMaps:
    """Softmax of k independent smoothed white-noise fields; seed-deterministic.

    The smoothing convolution is circular, carried out in the Fourier domain.
    """
    rng = np.random.default_rng(params.seed)
    noise = rng.standard_normal((params.k, params.n, params.n))
    kern = gaussian_smoothing_kernel(params.sigma_amp, params.xi, params.n)
    kern_hat = np.fft.fft2(np.fft.ifftshift(kern))
    fields = np.fft.ifft2(np.fft.fft2(noise, axes=(1, 2)) * kern_hat, axes=(1, 2)).real
    fields -= fields.max(axis=0, keepdims=True)
    e = np.exp(fields)
    return ProbMaps(e / e.sum(axis=0, keepdims=True))


@dataclass(frozen=True)
class TextureParams:
    """Oriented-texture settings.

    theta0_deg holds one center orientation per segment. sigma_theta_deg is
    the (approximate) orientation bandwidth of the energy profile.
    mode_cycles_per_image positions the radial log-normal mode; use
    from_physical() to convert a cycles-per-degree mode through a screen
    pixel density instead. rms_contrast is in 8-bit gray levels.
    """

    theta0_deg: tuple[float, ...]
    sigma_theta_deg: float = 5.0
    mode_cycles_per_image: float = 19.6
    bandwidth_oct: float = 2.0
    rms_contrast: float = 35.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "theta0_deg", tuple(float(t) for t in self.theta0_deg))
        if len(self.theta0_deg) < 1:
            raise ContractViolation("need at least one segment orientation")
        for v, name in (
            (self.sigma_theta_deg, "sigma_theta_deg"),
            (self.mode_cycles_per_image, "mode_cycles_per_image"),
            (self.bandwidth_oct, "bandwidth_oct"),
            (self.rms_contrast, "rms_contrast"),
        ):
            if v <= 0:
                raise ContractViolation(f"{name} must be positive")

    @classmethod
    def from_physical(
        cls,
        theta0_deg,
        m_r_cycles_per_deg: float,
        px_per_cm: float,
        image_px: int,
        **kwargs,
    ) -> "TextureParams":
        """Physical route: mode in cycles/deg over a screen of px_per_cm.

        Treats one on-screen centimeter as one degree of visual angle
        (i.e. a 57.3 cm viewing distance), so cycles/px = m_r / px_per_cm.
        """
        if m_r_cycles_per_deg <= 0 or px_per_cm <= 0:
            raise ContractViolation("physical parameters must be positive")
        cpp = m_r_cycles_per_deg / px_per_cm
        return cls(
            theta0_deg=theta0_deg,
            mode_cycles_per_image=cpp * image_px,
            **kwargs,
        )

    @property
    def sigma_r(self) -> float:
        return bandwidth_to_sigma_r(self.bandwidth_oct)

    def r0_cycles_per_px(self, image_px: int) -> float:
        """Log-normal parameter r0 = mode * (1 + sigma_r^2), in cycles/px."""
        return (self.mode_cycles_per_image / image_px) * (1.0 + self.sigma_r**2)


def bandwidth_to_sigma_r(bandwidth_oct: float) -> float:
    """Radial spread of the log-normal kernel from an octave bandwidth."""
    if bandwidth_oct <= 0:
        raise ContractViolation("bandwidth must be positive")
    return float(np.sqrt(np.exp(np.log(2.0) / 8.0 * bandwidth_oct**2) - 1.0))


def fourier_texture_kernel(
    r,
    theta,
    theta0: float,
    sigma_theta: float,
    r0: float,
    sigma_r: float,
):
    """Amplitude kernel in frequency polar coordinates (angles in radians).

    The angular factor exp(cos(2(theta-theta0)) / (4 sigma_theta^2))^(1/2)
    peaks at theta0 with period pi; the radial factor is a log-normal bump
    with mode r0. r must be strictly positive (r is in cycles/px, Nyquist
    at 1/2); grid builders mask the DC bin to zero instead.
    """
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0.0):
        raise ContractViolation("radial frequency must be > 0")
    theta = np.asarray(theta, dtype=np.float64)
    ang = np.exp(np.cos(2.0 * (theta - theta0)) / (4.0 * sigma_theta**2)) ** 0.5
    rad = np.exp(-np.log(r / r0) ** 2 / (2.0 * np.log(1.0 + sigma_r**2))) ** 0.5
    return ang * rad


def _freq_polar_grid(image_px: int) -> tuple[np.ndarray, np.ndarray]:
    f = np.fft.fftfreq(image_px)
    fx = f[None, :]
    fy = f[:, None]
    r = np.hypot(fx, fy)
    theta = np.mod(np.arctan2(fy, fx), np.pi)
    return r, theta


def oriented_kernel_grid(
    image_px: int,
    theta0: float,
    sigma_theta: float,
    r0: float,
    sigma_r: float,
) -> np.ndarray:
    """fftfreq-ordered kernel amplitudes with the DC bin set to zero."""
    r, theta = _freq_polar_grid(image_px)
    out = np.zeros_like(r)
    mask = r > 0
    out[mask] = fourier_texture_kernel(
        r[mask], theta[mask], theta0, sigma_theta, r0, sigma_r
    )
    return out


def upsample_maps(maps: ProbMaps, image_px: int) -> np.ndarray:
    """Nearest-neighbor upsampling of cell probabilities to pixel resolution."""
    if image_px % maps.n != 0:
        raise ContractViolation(
            f"image_px={image_px} not divisible by grid n={maps.n}"
        )
    s = image_px // maps.n
    return np.repeat(np.repeat(maps.values, s, axis=1), s, axis=2)


def synthesize_texture(
    maps: ProbMaps,
    params: TextureParams,
    image_px: int,
) -> np.ndarray:
    """Two-segment oriented texture as a float image in gray levels.

    The per-pixel orientation is the probability-weighted blend of the two
    segment orientations (maps are upsampled and softened by a 2.5 px
    Gaussian first). The same white noise is filtered by a bank of kernels
    at 1-degree steps spanning the blend range, and pixels interpolate
    linearly between the two nearest bank responses. The result is
    normalized to rms_contrast around mid-gray and clipped to [0, 255].
    """
    if maps.k != 2:
        raise ContractViolation("texture synthesis requires exactly 2 segments")
    if len(params.theta0_deg) != 2:
        raise ContractViolation("texture params must carry 2 segment orientations")

    p = upsample_maps(maps, image_px)
    p = np.stack(
        [ndimage.gaussian_filter(m, MAP_SMOOTHING_PX, mode="nearest") for m in p]
    )
    p /= p.sum(axis=0, keepdims=True)

    t0, t1 = params.theta0_deg
    theta_px_deg = p[0] * t0 + p[1] * t1

    lo = int(np.floor(min(t0, t1)))
    hi = int(np.ceil(max(t0, t1)))
    bank_deg = np.arange(lo, hi + 1, dtype=np.float64)

    rng = np.random.default_rng(params.seed)
    noise_hat = np.fft.fft2(rng.standard_normal((image_px, image_px)))
    sigma_theta = np.deg2rad(params.sigma_theta_deg)
    r0 = params.r0_cycles_per_px(image_px)
    bank = np.empty((len(bank_deg), image_px, image_px))
    for b, ang in enumerate(bank_deg):
        kern = oriented_kernel_grid(
            image_px, np.deg2rad(ang), sigma_theta, r0, params.sigma_r
        )
        bank[b] = np.fft.ifft2(noise_hat * kern).real

    if len(bank_deg) == 1:
        tex = bank[0]
    else:
        pos = np.clip(theta_px_deg - bank_deg[0], 0.0, len(bank_deg) - 1.0)
        lo_idx = np.minimum(pos.astype(np.int64), len(bank_deg) - 2)
        w = pos - lo_idx
        rows = np.arange(image_px)[:, None]
        cols = np.arange(image_px)[None, :]
        tex = (1.0 - w) * bank[lo_idx, rows, cols] + w * bank[lo_idx + 1, rows, cols]

    tex = (tex - tex.mean()) / tex.std() * params.rms_contrast + MEAN_GRAY
    return np.clip(tex, 0.0, 255.0)


def synthesize_rgb_clusters(
    maps: ProbMaps,
    palette: np.ndarray,
    noise_sd: float = 0.08,
    seed: int = 0,
    image_px: int | None = None,
) -> np.ndarray:
    """Color image: per-pixel segment sampled from the cell's probabilities,
    RGB = palette mean + isotropic Gaussian noise, clamped to [0, 1].

    Returns a (image_px, image_px, 3) float array. image_px defaults to the
    grid side (one pixel per cell).
    """
    palette = np.asarray(palette, dtype=np.float64)
    if palette.shape != (maps.k, 3):
        raise ContractViolation(
            f"palette must be ({maps.k}, 3) RGB means, got {palette.shape}"
        )
    if noise_sd < 0:
        raise ContractViolation("noise_sd must be >= 0")
    if image_px is None:
        image_px = maps.n
    probs = upsample_maps(maps, image_px)
    rng = np.random.default_rng(seed)
    u = rng.random((image_px, image_px))
    cum = np.cumsum(probs, axis=0)
    labels = (u[None] > cum).sum(axis=0)
    labels = np.minimum(labels, maps.k - 1)
    img = palette[labels]
    if noise_sd > 0:
        img = img + rng.normal(scale=noise_sd, size=img.shape)
    return np.clip(img, 0.0, 1.0)
