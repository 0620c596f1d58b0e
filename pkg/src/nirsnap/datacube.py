"""Hyperspectral datacube container, binary cube format, synthetic scene
generation, and per-band PNG export.

Cubes are stored band-sequential (all of band 0, then band 1, ...) with a
uniform wavelength grid in the header.  Synthetic scenes replace measured
data: rectangular patches with constant, Gaussian-in-wavelength, or linear
ramp spectra over a uniform background.
"""

import io
import json
from dataclasses import dataclass

import numpy as np

from . import _binio
from .errors import ValidationError

NCUB_MAGIC = b"NCUB"


@dataclass(frozen=True)
class HyperCube:
    """H x W x B cube of band images with their wavelengths (meters).

    Scene radiance is conventionally normalized to [0, 1]; reconstructions
    may exceed that range, so only finiteness is enforced here.
    """

    data: np.ndarray
    wavelengths: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        wavelengths = np.asarray(self.wavelengths, dtype=np.float64)
        if data.ndim != 3:
            raise ValidationError(f"cube data must be H x W x B, got {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError(f"cube spatial dims must be >= 1, got {data.shape}")
        if wavelengths.ndim != 1 or wavelengths.size != data.shape[2]:
            raise ValidationError(
                f"{wavelengths.size} wavelengths for {data.shape[2]} bands"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError("cube contains non-finite values")
        if wavelengths.size > 1 and np.any(np.diff(wavelengths) <= 0):
            raise ValidationError("wavelengths must be strictly increasing")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "wavelengths", wavelengths)

    @property
    def shape(self):
        return self.data.shape

    @property
    def band_count(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class CubeHeader:
    """Parsed NCUB header."""

    height: int
    width: int
    bands: int
    lambda_min: float
    lambda_step: float


@dataclass(frozen=True)
class Patch:
    """A rectangle (x, y, w, h in pixels; x is the column) with a spectrum.

    Spectrum kinds:
      constant: {"kind": "constant", "value": v}
      gaussian: {"kind": "gaussian", "center": m, "width": m, "peak": v}
      ramp:     {"kind": "ramp", "start": v0, "stop": v1}  (over the cube's span)
    """

    rect: tuple
    spectrum: dict

    def __post_init__(self):
        if len(self.rect) != 4:
            raise ValidationError(f"rect must be (x, y, w, h), got {self.rect}")
        x, y, w, h = self.rect
        if min(x, y) < 0 or min(w, h) < 1:
            raise ValidationError(f"rect has invalid extents: {self.rect}")
        kind = self.spectrum.get("kind")
        required = {
            "constant": {"kind", "value"},
            "gaussian": {"kind", "center", "width", "peak"},
            "ramp": {"kind", "start", "stop"},
        }
        if kind not in required:
            raise ValidationError(f"unknown spectrum kind {kind!r}")
        keys = set(self.spectrum)
        if keys != required[kind]:
            raise ValidationError(
                f"spectrum {kind!r} expects keys {sorted(required[kind])}, got {sorted(keys)}"
            )
        for name in required[kind] - {"kind"}:
            v = float(self.spectrum[name])
            if not np.isfinite(v):
                raise ValidationError(f"spectrum field {name!r} must be finite")
        for name in ("value", "peak", "start", "stop"):
            if name in self.spectrum and not 0.0 <= float(self.spectrum[name]) <= 1.0:
                raise ValidationError(f"spectrum field {name!r} must lie in [0, 1]")
        if kind == "gaussian" and float(self.spectrum["width"]) <= 0:
            raise ValidationError("gaussian spectrum width must be positive")

    def evaluate(self, wavelengths: np.ndarray) -> np.ndarray:
        kind = self.spectrum["kind"]
        if kind == "constant":
            return np.full(wavelengths.shape, float(self.spectrum["value"]))
        if kind == "gaussian":
            center = float(self.spectrum["center"])
            width = float(self.spectrum["width"])
            peak = float(self.spectrum["peak"])
            return peak * np.exp(-0.5 * ((wavelengths - center) / width) ** 2)
        start = float(self.spectrum["start"])
        stop = float(self.spectrum["stop"])
        span = wavelengths[-1] - wavelengths[0]
        if span == 0:
            return np.full(wavelengths.shape, start)
        t = (wavelengths - wavelengths[0]) / span
        return start + (stop - start) * t


@dataclass(frozen=True)
class SceneSpec:
    """Patch list over a uniform background value."""

    patches: tuple
    background: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.background <= 1.0:
            raise ValidationError(f"background must lie in [0, 1], got {self.background}")
        object.__setattr__(self, "patches", tuple(self.patches))


def scene_from_json(text: str) -> tuple:
    """Parse a scene document; returns (SceneSpec, height, width).

    Expected shape: {"height": H, "width": W, "background": b,
    "patches": [{"rect": [x, y, w, h], "spectrum": {...}}, ...]}.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scene document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("scene document must be a JSON object")
    allowed = {"height", "width", "background", "patches"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"scene document has unknown keys: {sorted(unknown)}")
    try:
        height = int(doc["height"])
        width = int(doc["width"])
    except KeyError as exc:
        raise ValidationError(f"scene document missing key {exc}") from None
    patches = []
    for entry in doc.get("patches", []):
        extra = set(entry) - {"rect", "spectrum"}
        if extra:
            raise ValidationError(f"patch has unknown keys: {sorted(extra)}")
        patches.append(Patch(tuple(entry["rect"]), dict(entry["spectrum"])))
    spec = SceneSpec(tuple(patches), float(doc.get("background", 0.0)))
    return spec, height, width


def synth_scene(spec: SceneSpec, height: int, width: int, wavelengths) -> HyperCube:
    """Render the scene: background everywhere, then patches in list order."""
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    data = np.full((height, width, wavelengths.size), spec.background)
    for patch in spec.patches:
        x, y, w, h = patch.rect
        if x + w > width or y + h > height:
            raise ValidationError(
                f"patch rect {patch.rect} exceeds the {height}x{width} frame"
            )
        data[y : y + h, x : x + w, :] = patch.evaluate(wavelengths)
    return HyperCube(data, wavelengths)


def _uniform_step(wavelengths: np.ndarray) -> float:
    if wavelengths.size < 2:
        return 0.0
    step = float(wavelengths[1] - wavelengths[0])
    if np.any(np.abs(np.diff(wavelengths) - step) > 1e-15 + 1e-9 * abs(step)):
        raise ValidationError("cube serialization requires a uniform wavelength grid")
    return step


def save_cube(cube: HyperCube, path) -> None:
    """Write the NCUB binary format (band-sequential f32 payload)."""
    height, width, bands = cube.shape
    step = _uniform_step(cube.wavelengths)
    planes = np.moveaxis(cube.data, 2, 0)  # band-sequential
    blob = (
        NCUB_MAGIC
        + _binio.pack("III", height, width, bands)
        + _binio.pack("dd", cube.wavelengths[0], step)
        + _binio.f32_bytes(planes)
    )
    _binio.write_atomic(path, blob)


def read_cube_header(path) -> CubeHeader:
    r = _binio.Reader(_binio.read_file(path), path)
    return _read_header(r)


def _read_header(r: _binio.Reader) -> CubeHeader:
    r.expect_magic(NCUB_MAGIC)
    height, width, bands = r.unpack("III")
    lam0, dlam = r.unpack("dd")
    return CubeHeader(height, width, bands, lam0, dlam)


def load_cube(path) -> HyperCube:
    r = _binio.Reader(_binio.read_file(path), path)
    hdr = _read_header(r)
    count = hdr.bands * hdr.height * hdr.width
    planes = r.f32_array(count, "cube payload").reshape(
        hdr.bands, hdr.height, hdr.width
    )
    r.expect_eof()
    wavelengths = hdr.lambda_min + hdr.lambda_step * np.arange(hdr.bands)
    return HyperCube(np.moveaxis(planes, 0, 2).astype(np.float64), wavelengths)


def write_gray16_png(image: np.ndarray, path) -> None:
    """Write a 2-D array as a 16-bit grayscale PNG, min-max normalized.

    Constant images map to mid-gray (32768).
    """
    from PIL import Image

    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValidationError(f"PNG export expects a 2-D array, got {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValidationError("PNG export input contains non-finite values")
    lo, hi = image.min(), image.max()
    if hi > lo:
        scaled = np.rint((image - lo) / (hi - lo) * 65535.0)
    else:
        scaled = np.full(image.shape, 32768.0)
    buf = io.BytesIO()
    Image.fromarray(scaled.astype(np.uint16)).save(buf, format="PNG")
    _binio.write_atomic(path, buf.getvalue())


def export_band(cube: HyperCube, band_index: int, path) -> None:
    """Export one band of the cube as a 16-bit grayscale PNG."""
    if not 0 <= band_index < cube.band_count:
        raise ValidationError(
            f"band index {band_index} out of range [0, {cube.band_count})"
        )
    write_gray16_png(cube.data[:, :, band_index], path)
