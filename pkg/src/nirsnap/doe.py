"""Rotationally symmetric diffractive element: height map generation,
quantization, fabrication-error modeling, and material dispersion.

The element is described by a 512-sample radial height profile that is swept
around the optical axis onto a square grid (nearest radial sample wins, which
keeps the map exactly invariant under 90-degree turns about the center pixel).
Heights are quantized to a fixed number of uniform levels spanning one
full-wave depth, and etching tolerances are modeled as a bounded uniform
per-pixel perturbation.
"""

from dataclasses import dataclass

import numpy as np

from . import _binio
from .errors import ValidationError
from .grid import aperture_mask, radius_grid

PROFILE_SAMPLES = 512

NDOE_MAGIC = b"NDOE"

# Three-term Sellmeier coefficients for fused silica (Malitson),
# wavelength in micrometers.
_SELLMEIER_B = (0.6961663, 0.4079426, 0.8974794)
_SELLMEIER_C_UM = (0.0684043, 0.1162414, 9.896161)


@dataclass(frozen=True)
class RadialProfile:
    """Height profile along the radius: 512 samples, `sample_pitch` apart."""

    samples: np.ndarray
    sample_pitch: float = 4e-6

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.shape != (PROFILE_SAMPLES,):
            raise ValidationError(
                f"radial profile must have {PROFILE_SAMPLES} samples, "
                f"got {samples.size}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValidationError("radial profile contains non-finite heights")
        if np.any(samples < 0):
            raise ValidationError("radial profile heights must be >= 0")
        if self.sample_pitch <= 0:
            raise ValidationError(f"sample_pitch must be positive, got {self.sample_pitch}")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class HeightMap:
    """Surface height h(x, y) in meters on an N x N grid, zero outside the
    aperture disk, with a flat transmission amplitude inside it."""

    heights: np.ndarray
    pixel_pitch: float
    aperture_radius: float
    amplitude: float = 1.0

    def __post_init__(self):
        heights = np.asarray(self.heights, dtype=np.float64)
        if heights.ndim != 2 or heights.shape[0] != heights.shape[1]:
            raise ValidationError(f"height map must be square, got {heights.shape}")
        if self.pixel_pitch <= 0 or self.aperture_radius <= 0:
            raise ValidationError("pixel_pitch and aperture_radius must be positive")
        if not np.all(np.isfinite(heights)):
            raise ValidationError("height map contains non-finite values")
        if np.any(heights < 0):
            raise ValidationError("height map contains negative heights")
        mask = self.mask()
        if np.any(heights[~mask] != 0.0):
            raise ValidationError("heights outside the aperture disk must be 0")
        object.__setattr__(self, "heights", heights)

    @property
    def grid_size(self) -> int:
        return self.heights.shape[0]

    def mask(self) -> np.ndarray:
        """Boolean in-aperture mask (pixel radius <= aperture_radius)."""
        return aperture_mask(self.grid_size, self.pixel_pitch, self.aperture_radius)


@dataclass(frozen=True)
class MaterialModel:
    """Refractive index model: dispersive fused silica or a fixed constant."""

    mode: str = "sellmeier_fused_silica"
    constant_index: float = 1.5

    def __post_init__(self):
        if self.mode not in ("sellmeier_fused_silica", "constant"):
            raise ValidationError(f"unknown material mode {self.mode!r}")
        if self.mode == "constant" and self.constant_index <= 1.0:
            raise ValidationError(
                f"constant_index must exceed 1, got {self.constant_index}"
            )


@dataclass(frozen=True)
class DoeFabSpec:
    """Fabrication parameters: level count, full structure depth, etch tolerance."""

    levels: int = 16
    total_depth: float = 2.2192e-6
    error_bound: float = 40e-9

    def __post_init__(self):
        if self.levels < 2:
            raise ValidationError(f"levels must be >= 2, got {self.levels}")
        if self.total_depth <= 0:
            raise ValidationError(f"total_depth must be positive, got {self.total_depth}")
        if self.error_bound < 0:
            raise ValidationError(f"error_bound must be >= 0, got {self.error_bound}")

    @property
    def step(self) -> float:
        return self.total_depth / self.levels


def rotate_radial_profile(
    profile: RadialProfile,
    grid_size: int,
    pixel_pitch: float,
    aperture_radius: float,
    amplitude: float = 1.0,
) -> HeightMap:
    """Sweep the radial profile around the center pixel onto an N x N grid.

    Each pixel takes the profile sample nearest to its radius
    (index round(r / sample_pitch), clamped to [0, 511]); pixels beyond the
    aperture radius are set to zero.
    """
    if grid_size % 2 != 0 or grid_size < 2:
        raise ValidationError(f"grid_size must be even and >= 2, got {grid_size}")
    if pixel_pitch <= 0:
        raise ValidationError(f"pixel_pitch must be positive, got {pixel_pitch}")
    if aperture_radius > grid_size * pixel_pitch / 2:
        raise ValidationError(
            f"aperture radius {aperture_radius} exceeds the grid half-span "
            f"{grid_size * pixel_pitch / 2}"
        )
    r = radius_grid(grid_size, pixel_pitch)
    idx = np.rint(r / profile.sample_pitch).astype(np.int64)
    np.clip(idx, 0, PROFILE_SAMPLES - 1, out=idx)
    heights = profile.samples[idx]
    heights[r > aperture_radius] = 0.0
    return HeightMap(heights, pixel_pitch, aperture_radius, amplitude)


def quantize_height(height_map: HeightMap, spec: DoeFabSpec) -> HeightMap:
    """Snap every height to the nearest of the `levels` uniform steps.

    Levels are {k * total_depth / levels, k = 0..levels-1}; ties round toward
    the higher level, and the full depth itself wraps to level 0 (it is one
    full wave of phase, so optically identical).
    """
    h = height_map.heights
    if np.any(h < 0) or np.any(h > spec.total_depth):
        raise ValidationError(
            f"heights must lie in [0, {spec.total_depth}] before quantization; "
            f"found range [{h.min()}, {h.max()}]"
        )
    k = np.floor(h / spec.step + 0.5).astype(np.int64) % spec.levels
    quant = k.astype(np.float64) * spec.step
    # out-of-aperture pixels are already 0 and map to level 0
    return HeightMap(
        quant, height_map.pixel_pitch, height_map.aperture_radius, height_map.amplitude
    )


def apply_fabrication_error(
    height_map: HeightMap, spec: DoeFabSpec, seed: int
) -> HeightMap:
    """Perturb each in-aperture height by a uniform draw from [-b, +b].

    The input must already be quantized onto the level grid.  Perturbed
    heights are clamped below at zero; out-of-aperture pixels stay zero.
    Identical seeds produce identical maps.
    """
    h = height_map.heights
    k = np.rint(h / spec.step)
    if np.any(np.abs(h - k * spec.step) > 1e-6 * spec.total_depth):
        raise ValidationError("height map must be quantized before applying fabrication error")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-spec.error_bound, spec.error_bound, size=h.shape)
    mask = height_map.mask()
    out = np.where(mask, np.maximum(h + noise, 0.0), 0.0)
    return HeightMap(
        out, height_map.pixel_pitch, height_map.aperture_radius, height_map.amplitude
    )


def refractive_index(material: MaterialModel, wavelength: float) -> float:
    """Refractive index at `wavelength` (meters), valid for 400-2000 nm."""
    if not 400e-9 <= wavelength <= 2000e-9:
        raise ValidationError(
            f"wavelength {wavelength} m outside the supported 400-2000 nm range"
        )
    if material.mode == "constant":
        return material.constant_index
    lam_um_sq = (wavelength * 1e6) ** 2
    acc = 1.0
    for b, c in zip(_SELLMEIER_B, _SELLMEIER_C_UM):
        acc += b * lam_um_sq / (lam_um_sq - c * c)
    return float(np.sqrt(acc))


def save_height_map(height_map: HeightMap, path) -> None:
    """Write the NDOE binary format (magic, N, pitch, radius, f32 heights)."""
    n = height_map.grid_size
    blob = (
        NDOE_MAGIC
        + _binio.pack("I", n)
        + _binio.pack("dd", height_map.pixel_pitch, height_map.aperture_radius)
        + _binio.f32_bytes(height_map.heights)
    )
    _binio.write_atomic(path, blob)


def load_height_map(path) -> HeightMap:
    """Read an NDOE file; the stored amplitude convention is 1.0."""
    r = _binio.Reader(_binio.read_file(path), path)
    r.expect_magic(NDOE_MAGIC)
    (n,) = r.unpack("I")
    pitch, radius = r.unpack("dd")
    heights = r.f32_array(n * n, "height map").reshape(n, n).astype(np.float64)
    r.expect_eof()
    return HeightMap(heights, pitch, radius)


def save_profile_txt(profile: RadialProfile, path) -> None:
    """Write the radial profile as plain text, one height (meters) per line."""
    lines = "".join(f"{v:.17g}\n" for v in profile.samples)
    _binio.write_atomic(path, lines.encode("ascii"))


def load_profile_txt(path, sample_pitch: float = 4e-6) -> RadialProfile:
    """Read a 512-line plain-text radial profile."""
    with open(path, "r", encoding="ascii") as fh:
        raw = [line.strip() for line in fh if line.strip()]
    try:
        values = np.array([float(v) for v in raw], dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric profile entry ({exc})") from None
    if values.size != PROFILE_SAMPLES:
        raise ValidationError(
            f"{path}: radial profile must have {PROFILE_SAMPLES} samples, "
            f"got {values.size}"
        )
    return RadialProfile(values, sample_pitch)
