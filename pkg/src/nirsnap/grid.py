"""Centered square-grid helpers shared by the optics modules.

All grids are N x N with the optical axis at pixel index (N//2, N//2),
matching the FFT-shift convention: after a centered transform the DC term
lands on that same pixel.  Rotations about the center pixel are defined
periodically (offsets wrap mod N), which is the symmetry the discrete
Fourier transform actually respects on an even grid.
"""

import numpy as np

from .errors import ValidationError


def centered_offsets(n: int) -> np.ndarray:
    """Integer pixel offsets from the center pixel, [-n//2 .. n//2 - 1]."""
    return np.arange(n) - n // 2


def squared_radius_grid(n: int, pixel_pitch: float) -> np.ndarray:
    """x^2 + y^2 in meters^2 for every pixel, measured from the center pixel."""
    d = centered_offsets(n).astype(np.float64)
    dx2 = d * d
    return (dx2[:, None] + dx2[None, :]) * (pixel_pitch * pixel_pitch)


def radius_grid(n: int, pixel_pitch: float) -> np.ndarray:
    """Radial distance in meters from the center pixel for every pixel."""
    d = centered_offsets(n).astype(np.float64)
    return np.hypot(d[:, None], d[None, :]) * pixel_pitch


def aperture_mask(n: int, pixel_pitch: float, radius: float) -> np.ndarray:
    """Boolean disk: True where the pixel center lies within `radius` meters."""
    if radius <= 0:
        raise ValidationError(f"aperture radius must be positive, got {radius}")
    return radius_grid(n, pixel_pitch) <= radius


def quarter_turn(a: np.ndarray, turns: int = 1) -> np.ndarray:
    """Rotate a square array by 90-degree steps about its center pixel.

    The rotation is periodic: offsets from pixel (N//2, N//2) are rotated
    and wrapped mod N.  Four turns return the original array exactly.
    """
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"quarter_turn needs a square array, got {a.shape}")
    out = a
    for _ in range(turns % 4):
        # target[i, j] = source[(n - j) % n, i]
        out = out[(n - np.arange(n)) % n, :].T
    return np.ascontiguousarray(out)


def point_reflect(a: np.ndarray) -> np.ndarray:
    """Periodic point reflection about the center pixel (two quarter turns)."""
    return quarter_turn(a, 2)
