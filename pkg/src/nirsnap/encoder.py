"""Spectral encoding: per-band PSF convolution, sensor-response weighting,
band summation, and additive sensor noise.

Each band image is convolved (zero-padded linear convolution, computed in
the Fourier domain) with its PSF slice, the result is cropped back to the
scene footprint with the PSF center as the origin, scaled by the sensor
response at that wavelength, and accumulated.  Bands are summed in fixed
order so results are run-to-run identical.
"""

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from . import _binio
from .datacube import HyperCube, write_gray16_png
from .errors import ValidationError
from .propagation import PSFStack

NIMG_MAGIC = b"NIMG"


@dataclass(frozen=True)
class SensorModel:
    """Wavelength response table plus an additive noise description.

    `response_curve` is a sorted sequence of (wavelength_m, weight) pairs,
    linearly interpolated.  `noise_sigma` is a fraction of the image maximum;
    `noise_kind` is "gaussian" or "none".
    """

    response_curve: tuple = ((700e-9, 1.0), (1000e-9, 1.0))
    noise_sigma: float = 0.01
    noise_kind: str = "gaussian"

    def __post_init__(self):
        curve = tuple((float(w), float(v)) for w, v in self.response_curve)
        if len(curve) < 2:
            raise ValidationError("response curve needs at least 2 entries")
        waves = [w for w, _ in curve]
        if any(b <= a for a, b in zip(waves, waves[1:])):
            raise ValidationError("response curve wavelengths must be strictly increasing")
        if any(v < 0 for _, v in curve):
            raise ValidationError("response weights must be >= 0")
        if self.noise_sigma < 0:
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.noise_kind not in ("gaussian", "none"):
            raise ValidationError(f"unknown noise kind {self.noise_kind!r}")
        object.__setattr__(self, "response_curve", curve)


@dataclass(frozen=True)
class EncodedImage:
    """Single sensor image produced by the spectral encoder."""

    data: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValidationError(f"encoded image must be 2-D, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("encoded image contains non-finite values")
        object.__setattr__(self, "data", data)


def sensor_response(sensor: SensorModel, wavelength: float) -> float:
    """Linearly interpolated response weight; errors outside the table range.

    Wavelengths within 1e-9 relative tolerance of the table ends (rounding
    noise from reconstructed grids) are clamped onto them.
    """
    waves = np.array([w for w, _ in sensor.response_curve])
    vals = np.array([v for _, v in sensor.response_curve])
    lo, hi = waves[0], waves[-1]
    slack = 1e-9
    if not lo - abs(lo) * slack <= wavelength <= hi + abs(hi) * slack:
        raise ValidationError(
            f"wavelength {wavelength} outside response table range [{lo}, {hi}]"
        )
    wavelength = min(max(wavelength, lo), hi)
    return float(np.interp(wavelength, waves, vals))


def _check_grids(cube: HyperCube, psfs: PSFStack) -> None:
    if cube.band_count != psfs.band_count or not np.allclose(
        cube.wavelengths, psfs.wavelengths, rtol=1e-9, atol=1e-15
    ):
        raise ValidationError(
            "wavelength grids disagree: cube has "
            f"{_grid_desc(cube.wavelengths)}, PSF stack has "
            f"{_grid_desc(psfs.wavelengths)}"
        )
    height, width = cube.shape[:2]
    if height > psfs.grid_size or width > psfs.grid_size:
        raise ValidationError(
            f"cube spatial dims {height}x{width} exceed PSF support "
            f"{psfs.grid_size}x{psfs.grid_size}"
        )


def _grid_desc(waves: np.ndarray) -> str:
    return f"{waves.size} bands {waves[0] * 1e9:.1f}-{waves[-1] * 1e9:.1f} nm"


def convolve_bands(data: np.ndarray, kernels: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Sum over bands of weight * crop(linear_conv(band, kernel)).

    The crop keeps the H x W window whose origin places each kernel's center
    pixel (N//2, N//2) on the source pixel it spreads from.
    """
    height, width = data.shape[:2]
    ck = kernels.shape[1] // 2
    acc = np.zeros((height, width))
    for b in range(data.shape[2]):
        if weights[b] == 0.0:
            continue
        full = fftconvolve(data[:, :, b], kernels[b], mode="full")
        acc += weights[b] * full[ck : ck + height, ck : ck + width]
    return acc


def correlate_bands(image: np.ndarray, kernels: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Exact adjoint of `convolve_bands`: per-band correlation, scaled."""
    height, width = image.shape
    n = kernels.shape[1]
    off = n - 1 - n // 2
    out = np.empty((height, width, kernels.shape[0]))
    for b in range(kernels.shape[0]):
        if weights[b] == 0.0:
            out[:, :, b] = 0.0
            continue
        full = fftconvolve(image, kernels[b, ::-1, ::-1], mode="full")
        out[:, :, b] = weights[b] * full[off : off + height, off : off + width]
    return out


def _provenance(cube: HyperCube, psfs: PSFStack, sensor: SensorModel, seed: int) -> str:
    digest = hashlib.sha256()
    digest.update(np.array(cube.shape, dtype="<i8").tobytes())
    digest.update(cube.wavelengths.astype("<f8").tobytes())
    digest.update(np.array(psfs.kernels.shape, dtype="<i8").tobytes())
    digest.update(np.array(sensor.response_curve, dtype="<f8").tobytes())
    digest.update(
        f"{sensor.noise_kind}:{sensor.noise_sigma}:{seed}".encode("ascii")
    )
    return digest.hexdigest()[:16]


def encode(cube: HyperCube, psfs: PSFStack, sensor: SensorModel, seed: int = 0) -> EncodedImage:
    """Encode a datacube into a single sensor image.

    Noiseless when the sensor's noise kind is "none"; otherwise Gaussian
    noise is added per `add_noise` using `seed`.
    """
    _check_grids(cube, psfs)
    weights = np.array([sensor_response(sensor, w) for w in cube.wavelengths])
    data = convolve_bands(cube.data, psfs.kernels, weights)
    image = EncodedImage(data, _provenance(cube, psfs, sensor, seed))
    if sensor.noise_kind == "none":
        return image
    return add_noise(image, sensor, seed)


def add_noise(image: EncodedImage, sensor: SensorModel, seed: int) -> EncodedImage:
    """Add zero-mean Gaussian noise with sigma = noise_sigma * max(image).

    The "none" kind is the identity.  Identical seeds give identical output.
    """
    if sensor.noise_kind == "none":
        return image
    scale = sensor.noise_sigma * max(float(image.data.max()), 0.0)
    rng = np.random.default_rng(seed)
    noisy = image.data + scale * rng.standard_normal(image.data.shape)
    return EncodedImage(noisy, image.provenance)


def save_image(image: EncodedImage, path) -> None:
    """Write the NIMG binary format (magic, H, W, f32 row-major)."""
    height, width = image.data.shape
    blob = (
        NIMG_MAGIC + _binio.pack("II", height, width) + _binio.f32_bytes(image.data)
    )
    _binio.write_atomic(path, blob)


def load_image(path) -> EncodedImage:
    r = _binio.Reader(_binio.read_file(path), path)
    r.expect_magic(NIMG_MAGIC)
    height, width = r.unpack("II")
    data = r.f32_array(height * width, "image payload").reshape(height, width)
    r.expect_eof()
    return EncodedImage(data.astype(np.float64))


def export_image_png(image: EncodedImage, path) -> None:
    """Write the encoded image as a 16-bit grayscale PNG for inspection."""
    write_gray16_png(image.data, path)
