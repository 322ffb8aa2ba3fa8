"""Image-quality metrics for reconstruction evaluation."""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .core import GeometryError


def _gaussian_window(size=11, sigma=1.5):
    half = (size - 1) / 2.0
    g = np.arange(size) - half
    w = np.exp(-(g[:, None] ** 2 + g[None, :] ** 2) / (2.0 * sigma**2))
    return w / w.sum()


def _as_array(a):
    return a.values if hasattr(a, "values") else np.asarray(a, dtype=float)


def ssim(a, b, data_range=None):
    """Mean structural similarity between two images.

    Local statistics use an 11x11 Gaussian window (sigma 1.5) on the valid
    interior; stabilization constants are (0.01*range)^2 and (0.03*range)^2
    with the dynamic range taken from the reference image b unless given
    explicitly.
    """
    x = _as_array(a)
    y = _as_array(b)
    if x.shape != y.shape:
        raise GeometryError(f"image shapes differ: {x.shape} vs {y.shape}")
    if min(x.shape) < 11:
        raise ValueError("images must be at least 11x11 for the SSIM window")
    if data_range is None:
        data_range = float(y.max() - y.min())
    if data_range <= 0:
        raise ValueError("dynamic range of the reference image is zero")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    win = _gaussian_window()

    def smooth(img):
        return convolve2d(img, win, mode="valid")

    mu_x = smooth(x)
    mu_y = smooth(y)
    var_x = smooth(x * x) - mu_x**2
    var_y = smooth(y * y) - mu_y**2
    cov = smooth(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def rel_l2(a, b):
    """Relative error ||a - b||_2 / ||b||_2."""
    x = _as_array(a)
    y = _as_array(b)
    if x.shape != y.shape:
        raise GeometryError(f"shapes differ: {x.shape} vs {y.shape}")
    norm = np.linalg.norm(y)
    if norm == 0:
        raise ValueError("reference is identically zero")
    return float(np.linalg.norm(x - y) / norm)


def max_abs_err(a, b):
    x = _as_array(a)
    y = _as_array(b)
    if x.shape != y.shape:
        raise GeometryError(f"shapes differ: {x.shape} vs {y.shape}")
    return float(np.max(np.abs(x - y)))


@dataclass(frozen=True)
class MetricReport:
    """Quality summary of one reconstruction against groundtruth."""

    ssim: float
    rel_l2: float
    max_abs_err: float
    residual_norms: dict = field(default_factory=dict)


def evaluate(recon, groundtruth, residual_norms=None):
    return MetricReport(
        ssim=ssim(recon, groundtruth),
        rel_l2=rel_l2(recon, groundtruth),
        max_abs_err=max_abs_err(recon, groundtruth),
        residual_norms=dict(residual_norms or {}),
    )
