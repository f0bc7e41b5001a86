"""Image-quality metrics over magnitude images: NRMSE, PSNR, SSIM.

Conventions: NRMSE is normalized by the reference Euclidean norm; PSNR uses
an explicit data range and returns ``inf`` for identical inputs (serialized
reports cap it at 99.0 dB); SSIM is the mean local index with an 11x11
Gaussian window (sigma 1.5) and stability constants K1 = 0.01, K2 = 0.03.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InvalidInputError, UndefinedMetricError

__all__ = ["PSNR_CAP_DB", "MetricReport", "nrmse", "psnr", "ssim", "metric_report"]

#: Flag value written to reports when PSNR is infinite (identical images).
PSNR_CAP_DB = 99.0

_SSIM_SIGMA = 1.5
_SSIM_TRUNCATE = 3.5  # radius 5 -> 11x11 window
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _pair(x, ref) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise InvalidInputError(f"shape mismatch: {x.shape} vs {ref.shape}")
    if x.ndim != 2:
        raise InvalidInputError(f"metrics expect 2-D magnitude images, got {x.shape}")
    return x, ref


def nrmse(x, ref) -> float:
    """Root-mean-square error normalized by the reference norm."""
    x, ref = _pair(x, ref)
    ref_norm = np.linalg.norm(ref)
    if ref_norm == 0:
        raise UndefinedMetricError("NRMSE is undefined for a zero-norm reference")
    return float(np.linalg.norm(x - ref) / ref_norm)


def psnr(x, ref, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are identical."""
    x, ref = _pair(x, ref)
    if data_range <= 0:
        raise InvalidInputError(f"data_range must be positive, got {data_range}")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(data_range**2 / mse))


def ssim(x, ref, data_range: float = 1.0) -> float:
    """Mean structural similarity with a Gaussian-weighted 11x11 window."""
    x, ref = _pair(x, ref)
    if data_range <= 0:
        raise InvalidInputError(f"data_range must be positive, got {data_range}")
    radius = int(_SSIM_TRUNCATE * _SSIM_SIGMA + 0.5)
    win = 2 * radius + 1
    if min(x.shape) < win:
        raise InvalidInputError(f"image {x.shape} is smaller than the {win}x{win} SSIM window")

    def smooth(a):
        return gaussian_filter(a, sigma=_SSIM_SIGMA, truncate=_SSIM_TRUNCATE, mode="reflect")

    ux, uy = smooth(x), smooth(ref)
    vx = smooth(x * x) - ux * ux
    vy = smooth(ref * ref) - uy * uy
    cov = smooth(x * ref) - ux * uy

    c1 = (_SSIM_K1 * data_range) ** 2
    c2 = (_SSIM_K2 * data_range) ** 2
    s = ((2 * ux * uy + c1) * (2 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    return float(s[radius:-radius, radius:-radius].mean())


@dataclass(frozen=True)
class MetricReport:
    """NRMSE / PSNR / SSIM for one image pair. PSNR may be ``inf`` in memory."""

    nrmse: float
    psnr: float
    ssim: float

    def to_json_dict(self) -> dict:
        return {
            "nrmse": self.nrmse,
            "psnr": min(self.psnr, PSNR_CAP_DB),
            "ssim": self.ssim,
        }


def metric_report(x, ref, data_range: float = 1.0) -> MetricReport:
    return MetricReport(
        nrmse=nrmse(x, ref),
        psnr=psnr(x, ref, data_range=data_range),
        ssim=ssim(x, ref, data_range=data_range),
    )
