"""
Full-reference image-quality measures for display-domain (DRC) images.

Responsibilities:
    * Speckle suppression by total-variation denoising (split Bregman, periodic
      boundaries, fixed iteration budget), optionally in the log domain.
    * PSNR with a fixed peak of 1.0.
    * Multi-scale SSIM built on scikit-image SSIM maps (11x11 Gaussian window).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy.ndimage import gaussian_filter
from skimage.metrics import structural_similarity
from skimage.transform import downscale_local_mean
from skimage.util import crop

from src.errors import ShapeMismatchError

PSNR_PEAK = 1.0
IDENTICAL_MSE = 1e-10

SSIM_SIGMA = 1.5
# scikit-image truncates its Gaussian at 3.5 sigma: an 11x11 window at sigma 1.5.
SSIM_TRUNCATE = 3.5
SSIM_WINDOW = 2 * int(SSIM_TRUNCATE * SSIM_SIGMA + 0.5) + 1
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class DespeckleConfig:
    """
    Parameters
    ----------
    weight:
        Data-fidelity weight (lambda); larger keeps the output closer to the input.
    iterations:
        Fixed number of split-Bregman sweeps.
    log_domain:
        Denoise log(img + epsilon) and exponentiate back (multiplicative noise).
    epsilon:
        Offset keeping the logarithm finite on zero pixels.
    preserve_mean:
        Rescale the log-domain result to the input mean.
    """

    weight: float = 1.0
    iterations: int = 50
    log_domain: bool = True
    epsilon: float = 1e-3
    preserve_mean: bool = True

    def __post_init__(self) -> None:
        if not self.weight > 0:
            raise ValueError(f"Despeckle weight must be positive, got {self.weight}")
        if self.iterations < 1:
            raise ValueError(f"Despeckle iterations must be >= 1, got {self.iterations}")
        if not self.epsilon > 0:
            raise ValueError(f"Despeckle epsilon must be positive, got {self.epsilon}")


# -- Total variation -------------------------------------------------------------


def _grad(u: np.ndarray) -> np.ndarray:
    """Periodic forward differences, stacked as (rows, cols, 2)."""
    return np.stack([np.roll(u, -1, axis=1) - u, np.roll(u, -1, axis=0) - u], axis=-1)


def _grad_adjoint(p: np.ndarray) -> np.ndarray:
    px, py = p[..., 0], p[..., 1]
    return (np.roll(px, 1, axis=1) - px) + (np.roll(py, 1, axis=0) - py)


def _shrink(x: np.ndarray, threshold: float) -> np.ndarray:
    """Isotropic soft-thresholding of each pixel's gradient vector."""
    norm = np.sqrt(np.sum(x**2, axis=-1))
    factor = np.maximum(norm - threshold, 0.0) / np.where(norm > 0, norm, 1.0)
    return x * factor[..., np.newaxis]


def _laplacian_symbol(shape: tuple[int, int]) -> np.ndarray:
    rows, cols = shape
    wy = 4.0 * np.sin(np.pi * np.arange(rows) / rows) ** 2
    wx = 4.0 * np.sin(np.pi * np.arange(cols) / cols) ** 2
    return wy[:, np.newaxis] + wx[np.newaxis, :]


def tv_denoise(img: np.ndarray, weight: float, iterations: int) -> np.ndarray:
    """
    Minimize TV(u) + weight/2 * ||u - img||^2 with split Bregman.

    The u-subproblem is a screened Poisson equation solved exactly with a 2-D
    FFT because the difference operators are periodic.
    """
    f = np.asarray(img, dtype=np.float64)
    mu = 2.0 * weight
    denom = weight + mu * _laplacian_symbol(f.shape)
    f_hat = scipy.fft.fft2(f)

    u = f.copy()
    d = np.zeros(f.shape + (2,))
    b = np.zeros_like(d)
    for _ in range(iterations):
        rhs = weight * f_hat + mu * scipy.fft.fft2(_grad_adjoint(d - b))
        u = np.real(scipy.fft.ifft2(rhs / denom))
        grad_u = _grad(u)
        d = _shrink(grad_u + b, 1.0 / mu)
        b = b + grad_u - d
    return u


def despeckle(img: np.ndarray, cfg: DespeckleConfig = DespeckleConfig()) -> np.ndarray:
    """Speckle-suppressed copy of a non-negative real image."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeMismatchError(f"despeckle expects a 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("despeckle input contains non-finite pixels")
    if np.any(img < 0):
        raise ValueError(f"despeckle input must be non-negative, min is {img.min():.3g}")

    if not cfg.log_domain:
        return tv_denoise(img, cfg.weight, cfg.iterations)

    out = np.exp(tv_denoise(np.log(img + cfg.epsilon), cfg.weight, cfg.iterations)) - cfg.epsilon
    out = np.clip(out, 0.0, None)
    if cfg.preserve_mean and out.mean() > 0:
        out *= img.mean() / out.mean()
    return out


# -- Full-reference metrics ------------------------------------------------------


def _check_pair(ref: np.ndarray, test: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise ShapeMismatchError(f"Reference shape {ref.shape} does not match test shape {test.shape}")
    if ref.ndim != 2:
        raise ShapeMismatchError(f"Expected 2-D images, got shape {ref.shape}")
    return ref, test


def psnr(ref: np.ndarray, test: np.ndarray, *, identical_mse: float = IDENTICAL_MSE) -> float:
    """
    Peak signal-to-noise ratio in dB with peak 1.0.

    Returns ``math.inf`` when the mean squared error is at or below
    ``identical_mse``.
    """
    ref, test = _check_pair(ref, test)
    mse = float(np.mean((ref - test) ** 2))
    if mse <= identical_mse:
        return math.inf
    return 10.0 * math.log10(PSNR_PEAK**2 / mse)


def _ssim_terms(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """
    Mean luminance term and mean contrast-structure term at one scale.

    The full SSIM map comes from scikit-image; the luminance map is rebuilt from
    the same Gaussian local means and divided out to leave contrast-structure.
    Both are averaged over the window-valid interior, as scikit-image does.
    """
    _, ssim_map = structural_similarity(
        x,
        y,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        data_range=PSNR_PEAK,
        K1=SSIM_K1,
        K2=SSIM_K2,
        full=True,
    )
    c1 = (SSIM_K1 * PSNR_PEAK) ** 2
    mu_x = gaussian_filter(x, SSIM_SIGMA, truncate=SSIM_TRUNCATE)
    mu_y = gaussian_filter(y, SSIM_SIGMA, truncate=SSIM_TRUNCATE)
    luminance = (2.0 * mu_x * mu_y + c1) / (mu_x**2 + mu_y**2 + c1)
    pad = (SSIM_WINDOW - 1) // 2
    return float(crop(luminance, pad).mean()), float(crop(ssim_map / luminance, pad).mean())


def _downsample(img: np.ndarray) -> np.ndarray:
    rows, cols = (img.shape[0] // 2) * 2, (img.shape[1] // 2) * 2
    return downscale_local_mean(img[:rows, :cols], (2, 2))


def ms_ssim_scales(shape: tuple[int, int]) -> int:
    """Number of dyadic scales whose smallest side still fits the SSIM window."""
    smallest = min(shape)
    scales = 0
    while scales < len(MS_SSIM_WEIGHTS) and smallest // 2**scales >= SSIM_WINDOW:
        scales += 1
    return scales


def ms_ssim(ref: np.ndarray, test: np.ndarray) -> float:
    """
    Multi-scale structural similarity in [0, 1].

    Contrast-structure terms from every scale and the luminance term from the
    coarsest one, combined as a weighted geometric product. Images too small
    for five scales drop the coarsest scales and renormalize the weights.
    Negative per-scale terms are clipped to zero.
    """
    ref, test = _check_pair(ref, test)
    scales = ms_ssim_scales(ref.shape)
    if scales == 0:
        raise ShapeMismatchError(f"Image {ref.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    weights = np.asarray(MS_SSIM_WEIGHTS[:scales])
    weights = weights / weights.sum()

    value = 1.0
    x, y = ref, test
    for scale, weight in enumerate(weights):
        luminance, contrast_structure = _ssim_terms(x, y)
        value *= max(contrast_structure, 0.0) ** weight
        if scale == scales - 1:
            value *= max(luminance, 0.0) ** weight
        else:
            x, y = _downsample(x), _downsample(y)
    return float(min(value, 1.0))
