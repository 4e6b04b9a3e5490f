"""SSIM quality scoring between an original and a reconstructed frame.

Windowed mean SSIM over an 11x11 Gaussian window (sigma 1.5, stride 1),
with the standard stabilizing constants for 8-bit data. The luminance,
contrast and structure components are exposed separately; their product
per window, averaged, is the quality score fed to the state and reward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

WINDOW = 11
SIGMA = 1.5
C1 = (0.01 * 255.0) ** 2
C2 = (0.03 * 255.0) ** 2
C3 = C2 / 2.0


def _gaussian_taps(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    taps = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return taps / taps.sum()


_TAPS = _gaussian_taps()


@dataclass(frozen=True)
class SsimResult:
    mean_ssim: float
    luminance: float
    contrast: float
    structure: float


def ssim(f: np.ndarray, g: np.ndarray) -> SsimResult:
    """Mean SSIM of two equally sized luma planes (8-bit value range)."""
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    if f.ndim != 2 or min(f.shape) < WINDOW:
        raise ValueError(f"inputs must be 2-D and at least {WINDOW}x{WINDOW}")
    f = f.astype(np.float64, copy=False)
    g = g.astype(np.float64, copy=False)

    mu_f = kernels.filter2_valid(f, _TAPS)
    mu_g = kernels.filter2_valid(g, _TAPS)
    e_ff = kernels.filter2_valid(f * f, _TAPS)
    e_gg = kernels.filter2_valid(g * g, _TAPS)
    e_fg = kernels.filter2_valid(f * g, _TAPS)

    var_f = np.maximum(e_ff - mu_f * mu_f, 0.0)
    var_g = np.maximum(e_gg - mu_g * mu_g, 0.0)
    cov = e_fg - mu_f * mu_g
    sd_f = np.sqrt(var_f)
    sd_g = np.sqrt(var_g)

    lum = (2.0 * mu_f * mu_g + C1) / (mu_f * mu_f + mu_g * mu_g + C1)
    con = (2.0 * sd_f * sd_g + C2) / (var_f + var_g + C2)
    stru = (cov + C3) / (sd_f * sd_g + C3)
    ssim_map = lum * con * stru
    return SsimResult(
        mean_ssim=float(ssim_map.mean()),
        luminance=float(lum.mean()),
        contrast=float(con.mean()),
        structure=float(stru.mean()),
    )
