"""PSNR and SSIM in linear intensity with peak value 1."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import DimensionMismatchError, FrameTooSmallError

MAX_VALUE = 1.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class MetricResult:
    psnr: float
    ssim: float


def _pixels(a) -> np.ndarray:
    return np.asarray(getattr(a, "intensity", a), dtype=np.float64)


def _pair(ref, test):
    a, b = _pixels(ref), _pixels(test)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape {a.shape} does not match {b.shape}")
    return a, b


def psnr(ref, test) -> float:
    a, b = _pair(ref, test)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return float("inf")
    return float(10 * np.log10(MAX_VALUE ** 2 / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(ref, test) -> float:
    """Mean single-scale SSIM over all fully-contained 11x11 Gaussian windows."""
    a, b = _pair(ref, test)
    if min(a.shape) < SSIM_WINDOW:
        raise FrameTooSmallError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    w = gaussian_window()
    C1 = (0.01 * MAX_VALUE) ** 2
    C2 = (0.03 * MAX_VALUE) ** 2

    def filt(x):
        return signal.convolve2d(x, w, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + C1) * (2 * cov + C2)
    den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2)
    return float(np.mean(num / den))


def evaluate(ref, test) -> MetricResult:
    return MetricResult(psnr(ref, test), ssim(ref, test))
