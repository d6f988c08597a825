"""Full-frame PSNR and SSIM for 8-bit-range channels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .image_model import Channel

_PEAK = 255.0
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


@dataclass(frozen=True)
class QualityReport:
    """PSNR (dB, +inf for identical inputs) and mean SSIM of one comparison."""

    psnr_db: float
    ssim: float


def _check_shapes(reference: Channel, test: Channel) -> None:
    if reference.shape != test.shape:
        raise ValidationError(
            "dimension_mismatch",
            f"shapes differ: {reference.shape} vs {test.shape}",
        )


def psnr(reference: Channel, test: Channel) -> float:
    """10 * log10(255^2 / MSE) over all pixels; +inf when the MSE is zero."""
    _check_shapes(reference, test)
    mse = float(np.mean((reference.values - test.values) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(_PEAK * _PEAK / mse)


def _gaussian_taps() -> np.ndarray:
    half = (_SSIM_WINDOW - 1) // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    taps = np.exp(-(x * x) / (2.0 * _SSIM_SIGMA * _SSIM_SIGMA))
    return taps / taps.sum()


def _windowed(arr: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # Separable Gaussian window; the border crop keeps only positions whose
    # window lies fully inside the image, so the boundary mode is irrelevant.
    half = len(taps) // 2
    out = ndimage.correlate1d(arr, taps, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, taps, axis=1, mode="nearest")
    return out[half : arr.shape[0] - half, half : arr.shape[1] - half]


def ssim(reference: Channel, test: Channel) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Uses the standard constants K1=0.01, K2=0.03 at a dynamic range of 255
    and averages the local SSIM map over all fully interior window positions.
    """
    _check_shapes(reference, test)
    if min(reference.shape) < _SSIM_WINDOW:
        raise ValidationError(
            "too_small",
            f"images must be at least {_SSIM_WINDOW} pixels on each side",
        )
    x = reference.values
    y = test.values
    taps = _gaussian_taps()
    mu_x = _windowed(x, taps)
    mu_y = _windowed(y, taps)
    sigma_xx = _windowed(x * x, taps) - mu_x * mu_x
    sigma_yy = _windowed(y * y, taps) - mu_y * mu_y
    sigma_xy = _windowed(x * y, taps) - mu_x * mu_y
    c1 = (_SSIM_K1 * _PEAK) ** 2
    c2 = (_SSIM_K2 * _PEAK) ** 2
    ssim_map = ((2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_xx + sigma_yy + c2)
    )
    return float(ssim_map.mean())


def evaluate(reference: Channel, test: Channel) -> QualityReport:
    """PSNR and SSIM of ``test`` against ``reference``."""
    return QualityReport(psnr_db=psnr(reference, test), ssim=ssim(reference, test))
