"""Image- and spectrum-quality metrics: PSNR, SSIM, spectral signatures."""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate

from . import _binio
from .datacube import HyperCube
from .errors import ValidationError


@dataclass(frozen=True)
class SsimParams:
    """Gaussian-window SSIM constants (Wang et al. defaults)."""

    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValidationError("window_size must be a positive odd integer")
        if self.sigma <= 0 or self.k1 <= 0 or self.k2 <= 0 or self.dynamic_range <= 0:
            raise ValidationError("sigma, k1, k2, dynamic_range must be positive")

    def window(self) -> np.ndarray:
        half = self.window_size // 2
        coords = np.arange(-half, half + 1, dtype=np.float64)
        g = np.exp(-(coords**2) / (2.0 * self.sigma**2))
        w = np.outer(g, g)
        return w / w.sum()


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE) over all elements; +inf when a == b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValidationError(f"peak must be positive, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def psnr_per_band(a: HyperCube, b: HyperCube, peak: float = 1.0) -> np.ndarray:
    """PSNR of each band separately (may contain +inf entries)."""
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return np.array(
        [psnr(a.data[:, :, i], b.data[:, :, i], peak) for i in range(a.band_count)]
    )


def _ssim_2d(a: np.ndarray, b: np.ndarray, params: SsimParams) -> float:
    win = params.window()
    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2

    def filt(img):
        return correlate(img, win, mode="valid")

    mu1 = filt(a)
    mu2 = filt(b)
    mu1_sq = mu1 * mu1
    mu2_sq = mu2 * mu2
    mu12 = mu1 * mu2
    sigma1_sq = filt(a * a) - mu1_sq
    sigma2_sq = filt(b * b) - mu2_sq
    sigma12 = filt(a * b) - mu12
    ssim_map = ((2.0 * mu12 + c1) * (2.0 * sigma12 + c2)) / (
        (mu1_sq + mu2_sq + c1) * (sigma1_sq + sigma2_sq + c2)
    )
    return float(np.mean(ssim_map))


def ssim(a, b, params: SsimParams = SsimParams()) -> float:
    """Mean local SSIM with a Gaussian window (valid-mode windows only).

    2-D inputs give the plain index; 3-D inputs (cubes or stacked bands)
    give the mean over bands.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 3:
        return float(
            np.mean([_ssim_2d(a[:, :, i], b[:, :, i], params) for i in range(a.shape[2])])
        )
    if a.ndim != 2:
        raise ValidationError(f"ssim expects 2-D or 3-D input, got {a.shape}")
    if min(a.shape) < params.window_size:
        raise ValidationError(
            f"image {a.shape} smaller than the {params.window_size}-pixel window"
        )
    return _ssim_2d(a, b, params)


def spectral_signature(cube: HyperCube, x: int, y: int) -> np.ndarray:
    """Per-band values at column x, row y (for curve plotting)."""
    height, width = cube.shape[:2]
    if not (0 <= x < width and 0 <= y < height):
        raise ValidationError(
            f"point ({x}, {y}) outside the {height}x{width} frame"
        )
    return cube.data[y, x, :].copy()


def metrics_report(recon: HyperCube, truth: HyperCube, peak: float = 1.0,
                   params: SsimParams = SsimParams()) -> dict:
    """JSON-ready summary: joint PSNR, mean SSIM, and per-band values.

    Infinite PSNR (identical inputs) is encoded as the string "inf".
    """
    if recon.shape != truth.shape:
        raise ValidationError(f"shape mismatch: {recon.shape} vs {truth.shape}")
    per_band = []
    for i, wav in enumerate(recon.wavelengths):
        band_psnr = psnr(recon.data[:, :, i], truth.data[:, :, i], peak)
        band_ssim = _ssim_2d(recon.data[:, :, i], truth.data[:, :, i], params)
        per_band.append(
            {
                "wavelength_nm": float(wav * 1e9),
                "psnr_db": _encode_db(band_psnr),
                "ssim": band_ssim,
            }
        )
    return {
        "psnr_db": _encode_db(psnr(recon.data, truth.data, peak)),
        "ssim": ssim(recon.data, truth.data, params),
        "per_band": per_band,
    }


def _encode_db(value: float):
    return "inf" if math.isinf(value) else value


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2)


def save_signature_csv(cube: HyperCube, x: int, y: int, path) -> None:
    """Write the spectral signature at (x, y) as `wavelength_nm,value` rows."""
    values = spectral_signature(cube, x, y)
    lines = ["wavelength_nm,value\n"]
    for wav, val in zip(cube.wavelengths, values):
        lines.append(f"{wav * 1e9:.6f},{val:.17g}\n")
    _binio.write_atomic(path, "".join(lines).encode("ascii"))
