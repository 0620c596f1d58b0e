"""Scalar wave propagation through the diffractive element to the sensor.

The imaging chain per wavelength is: a diverging point-source wavefront,
phase modulation by the element's height map, a quadratic pre-chirp for the
element-to-sensor distance, then a single centered FFT whose squared modulus
is the point spread function.  One normalized PSF slice is produced per
spectral band.
"""

from dataclasses import dataclass

import numpy as np

from . import _binio
from .doe import HeightMap, MaterialModel, refractive_index
from .errors import NumericError, ValidationError
from .grid import squared_radius_grid

NPSF_MAGIC = b"NPSF"


@dataclass(frozen=True)
class OpticalConfig:
    """Geometry and spectral sampling of the imaging system.

    `source_distance` is the point-source standoff z0; `propagation_distance`
    is the element-to-sensor gap.  The source curvature is modeled as
    (x^2 + y^2) / z0; set `paraxial_half_factor` to use the conventional
    (x^2 + y^2) / (2 z0) form instead.  `physical_rescale` resamples each PSF
    slice from its wavelength-dependent output pitch onto the pitch of the
    shortest wavelength.
    """

    source_distance: float = 1.0
    propagation_distance: float = 0.05
    lambda_min: float = 700e-9
    lambda_max: float = 1000e-9
    lambda_step: float = 10e-9
    grid_size: int = 1024
    pixel_pitch: float = 4e-6
    paraxial_half_factor: bool = False
    physical_rescale: bool = False

    def __post_init__(self):
        if self.source_distance <= 0 or self.propagation_distance <= 0:
            raise ValidationError("source and propagation distances must be positive")
        if not 0 < self.lambda_min < self.lambda_max:
            raise ValidationError("need 0 < lambda_min < lambda_max")
        if self.lambda_step <= 0:
            raise ValidationError("lambda_step must be positive")
        if self.grid_size < 2 or self.grid_size % 2 != 0:
            raise ValidationError(f"grid_size must be even and >= 2, got {self.grid_size}")
        if self.pixel_pitch <= 0:
            raise ValidationError("pixel_pitch must be positive")
        span = (self.lambda_max - self.lambda_min) / self.lambda_step
        if abs(span - round(span)) > 1e-6:
            raise ValidationError(
                "wavelength span must be an integer number of steps, got "
                f"{self.lambda_min}..{self.lambda_max} step {self.lambda_step}"
            )

    @property
    def band_count(self) -> int:
        return int(round((self.lambda_max - self.lambda_min) / self.lambda_step)) + 1

    @property
    def wavelengths(self) -> np.ndarray:
        return self.lambda_min + self.lambda_step * np.arange(self.band_count)


@dataclass(frozen=True)
class ComplexField:
    """Sampled complex wavefront at a single wavelength."""

    values: np.ndarray
    pixel_pitch: float
    wavelength: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValidationError(f"field must be square, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("field contains non-finite values")
        if self.pixel_pitch <= 0 or self.wavelength <= 0:
            raise ValidationError("pixel_pitch and wavelength must be positive")
        object.__setattr__(self, "values", values)

    @property
    def grid_size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PSFStack:
    """Per-wavelength nonnegative PSF kernels, each normalized to unit sum."""

    kernels: np.ndarray
    wavelengths: np.ndarray

    def __post_init__(self):
        kernels = np.asarray(self.kernels, dtype=np.float64)
        wavelengths = np.asarray(self.wavelengths, dtype=np.float64)
        if kernels.ndim != 3 or kernels.shape[1] != kernels.shape[2]:
            raise ValidationError(f"kernels must be B x N x N, got {kernels.shape}")
        if wavelengths.ndim != 1 or wavelengths.size != kernels.shape[0]:
            raise ValidationError(
                f"{wavelengths.size} wavelengths for {kernels.shape[0]} kernels"
            )
        if not np.all(np.isfinite(kernels)):
            raise ValidationError("PSF stack contains non-finite values")
        if np.any(kernels < 0):
            raise ValidationError("PSF stack contains negative values")
        sums = kernels.sum(axis=(1, 2))
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise ValidationError("every PSF slice must sum to 1 within 1e-6")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "wavelengths", wavelengths)

    @property
    def band_count(self) -> int:
        return self.kernels.shape[0]

    @property
    def grid_size(self) -> int:
        return self.kernels.shape[1]


def centered_fft2(values: np.ndarray) -> np.ndarray:
    """2-D DFT with the zero-frequency term at pixel (N//2, N//2)."""
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(values)))


def point_source_field(config: OpticalConfig, wavelength: float) -> ComplexField:
    """Diverging spherical wavefront sampled at the element plane.

    The value at physical offset (x, y) from the center pixel is
    exp(i * 2*pi/lambda * (x^2 + y^2) / z0), a unit-modulus quadratic phase.
    """
    if wavelength <= 0:
        raise ValidationError(f"wavelength must be positive, got {wavelength}")
    rsq = squared_radius_grid(config.grid_size, config.pixel_pitch)
    denom = config.source_distance
    if config.paraxial_half_factor:
        denom = 2.0 * denom
    phase = (2.0 * np.pi / wavelength) * rsq / denom
    return ComplexField(np.exp(1j * phase), config.pixel_pitch, wavelength)


def apply_doe(
    field: ComplexField, height_map: HeightMap, material: MaterialModel
) -> ComplexField:
    """Phase-delay the field by the element surface; zero outside the aperture.

    Inside the aperture the field is multiplied by
    amplitude * exp(i * 2*pi/lambda * (n - 1) * h).
    """
    if field.grid_size != height_map.grid_size:
        raise ValidationError(
            f"field grid {field.grid_size} != height map grid {height_map.grid_size}"
        )
    if field.pixel_pitch != height_map.pixel_pitch:
        raise ValidationError(
            f"field pitch {field.pixel_pitch} != height map pitch {height_map.pixel_pitch}"
        )
    n_lambda = refractive_index(material, field.wavelength)
    phase = (2.0 * np.pi / field.wavelength) * (n_lambda - 1.0) * height_map.heights
    modulated = field.values * np.exp(1j * phase)
    modulated *= height_map.amplitude
    modulated[~height_map.mask()] = 0.0
    return ComplexField(modulated, field.pixel_pitch, field.wavelength)


def propagate_to_sensor(field: ComplexField, propagation_distance: float) -> np.ndarray:
    """Propagate to the sensor and return the normalized intensity pattern.

    Applies the quadratic phase exp(i * 2*pi/lambda * (x^2+y^2) / (2 f)),
    takes a centered FFT, squares the modulus, and normalizes to unit sum.
    """
    if propagation_distance <= 0:
        raise ValidationError(
            f"propagation distance must be positive, got {propagation_distance}"
        )
    rsq = squared_radius_grid(field.grid_size, field.pixel_pitch)
    chirp = (2.0 * np.pi / field.wavelength) * rsq / (2.0 * propagation_distance)
    spectrum = centered_fft2(field.values * np.exp(1j * chirp))
    intensity = np.abs(spectrum) ** 2
    total = intensity.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise NumericError("propagated intensity has no finite energy to normalize")
    return intensity / total


def psf_output_pitch(config: OpticalConfig, wavelength: float) -> float:
    """Physical sensor-plane sampling pitch of one FFT-propagated slice."""
    return (
        wavelength
        * config.propagation_distance
        / (config.grid_size * config.pixel_pitch)
    )


def _rescale_slice(kernel: np.ndarray, zoom: float) -> np.ndarray:
    """Magnify a slice about the center pixel by `zoom` (bilinear, zero fill)."""
    from scipy import ndimage

    n = kernel.shape[0]
    c = n // 2
    # output pixel p samples input at c + (p - c) / zoom
    coords = (np.arange(n) - c) / zoom + c
    rows = np.repeat(coords, n).reshape(n, n)
    cols = np.tile(coords, n).reshape(n, n)
    out = ndimage.map_coordinates(
        kernel, [rows, cols], order=1, mode="constant", cval=0.0
    )
    total = out.sum()
    if total <= 0:
        raise NumericError("rescaled PSF slice lost all energy")
    return out / total


def compute_psf_stack(
    config: OpticalConfig, height_map: HeightMap, material: MaterialModel
) -> PSFStack:
    """One normalized PSF slice per band: source -> element -> sensor."""
    if height_map.grid_size != config.grid_size:
        raise ValidationError(
            f"height map grid {height_map.grid_size} != config grid {config.grid_size}"
        )
    if height_map.pixel_pitch != config.pixel_pitch:
        raise ValidationError(
            f"height map pitch {height_map.pixel_pitch} != config pitch {config.pixel_pitch}"
        )
    wavelengths = config.wavelengths
    kernels = np.empty((wavelengths.size, config.grid_size, config.grid_size))
    for i, lam in enumerate(wavelengths):
        src = point_source_field(config, lam)
        modulated = apply_doe(src, height_map, material)
        kernels[i] = propagate_to_sensor(modulated, config.propagation_distance)
    if config.physical_rescale:
        ref = psf_output_pitch(config, wavelengths[0])
        for i, lam in enumerate(wavelengths[1:], start=1):
            kernels[i] = _rescale_slice(kernels[i], psf_output_pitch(config, lam) / ref)
    return PSFStack(kernels, wavelengths)


def save_psf_stack(stack: PSFStack, path) -> None:
    """Write the NPSF binary format (magic, N, B, lam0, dlam, f32 slices)."""
    w = stack.wavelengths
    dlam = w[1] - w[0] if w.size > 1 else 0.0
    if w.size > 1 and np.any(np.abs(np.diff(w) - dlam) > 1e-15 + 1e-9 * dlam):
        raise ValidationError("NPSF requires a uniform wavelength grid")
    blob = (
        NPSF_MAGIC
        + _binio.pack("II", stack.grid_size, stack.band_count)
        + _binio.pack("dd", w[0], dlam)
        + _binio.f32_bytes(stack.kernels)
    )
    _binio.write_atomic(path, blob)


def load_psf_stack(path) -> PSFStack:
    r = _binio.Reader(_binio.read_file(path), path)
    r.expect_magic(NPSF_MAGIC)
    n, b = r.unpack("II")
    lam0, dlam = r.unpack("dd")
    kernels = r.f32_array(b * n * n, "PSF stack").reshape(b, n, n).astype(np.float64)
    r.expect_eof()
    wavelengths = lam0 + dlam * np.arange(b)
    return PSFStack(kernels, wavelengths)
