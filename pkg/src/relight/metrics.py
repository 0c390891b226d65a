"""Image quality metrics on the [0,1] scale.

psnr() and ssim() accept torch tensors or numpy arrays, grayscale (H,W) or
channel-first (C,H,W); everything is evaluated in float64. SSIM follows the
classic formulation: 11x11 Gaussian window, sigma 1.5, valid windows only,
per channel, then averaged.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .exceptions import ConfigurationError, ShapeError

_C1 = 0.01 ** 2
_C2 = 0.03 ** 2
_WINDOW = 11
_SIGMA = 1.5


def _as_float64(x) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        x = x.detach().cpu().numpy()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ShapeError(
            f"expected a (H,W) or (C,H,W) image, got shape {x.shape}")
    return x


def psnr(a, b) -> float:
    """10*log10(1/MSE) over all pixels and channels; +inf when identical."""
    a, b = _as_float64(a), _as_float64(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_1d(size: int = _WINDOW, sigma: float = _SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    xs = np.arange(size, dtype=np.float64) - half
    k = np.exp(-(xs ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def _filter_valid(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Separable valid-mode filtering of a 2D array with a 1D kernel."""
    n = k.size
    rows = np.lib.stride_tricks.sliding_window_view(img, n, axis=0)
    out = np.tensordot(rows, k, axes=([2], [0]))
    cols = np.lib.stride_tricks.sliding_window_view(out, n, axis=1)
    return np.tensordot(cols, k, axes=([2], [0]))


def ssim(a, b) -> float:
    a, b = _as_float64(a), _as_float64(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    h, w = a.shape[1], a.shape[2]
    if h < _WINDOW or w < _WINDOW:
        raise ConfigurationError(
            f"image {h}x{w} is smaller than the {_WINDOW}x{_WINDOW} window")
    k = _gaussian_1d()
    per_channel = []
    for c in range(a.shape[0]):
        x, y = a[c], b[c]
        mu_x = _filter_valid(x, k)
        mu_y = _filter_valid(y, k)
        var_x = _filter_valid(x * x, k) - mu_x ** 2
        var_y = _filter_valid(y * y, k) - mu_y ** 2
        cov = _filter_valid(x * y, k) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + _C1) * (2.0 * cov + _C2)
        den = (mu_x ** 2 + mu_y ** 2 + _C1) * (var_x + var_y + _C2)
        per_channel.append(float(np.mean(num / den)))
    return float(np.mean(per_channel))


@dataclass
class MetricReport:
    """Mean metrics plus a per-image (id, psnr, ssim) breakdown."""

    mean_psnr: float
    mean_ssim: float
    per_image: list = field(default_factory=list)
