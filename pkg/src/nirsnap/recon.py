"""Training-free reconstruction baseline: regularized least squares over the
spectral encoding operator, solved by conjugate gradients on the normal
equations.

The objective is  ||A x - y||^2 + reg_weight ||x||^2
                + spectral_smooth_weight ||D x||^2
where A is the noiseless encoder and D is the second difference across
bands.  The solver starts from zero and is fully deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .datacube import HyperCube
from .encoder import EncodedImage, SensorModel, convolve_bands, correlate_bands, sensor_response
from .errors import NumericError, ValidationError
from .propagation import PSFStack


@dataclass(frozen=True)
class ReconConfig:
    reg_weight: float = 1e-6
    spectral_smooth_weight: float = 0.0
    max_iters: int = 200
    tol: float = 1e-8

    def __post_init__(self):
        if self.reg_weight < 0 or self.spectral_smooth_weight < 0:
            raise ValidationError("regularization weights must be >= 0")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.tol < 1.0:
            raise ValidationError(f"tol must lie in (0, 1), got {self.tol}")


@dataclass(frozen=True)
class ReconResult:
    """Converged iterate plus per-iteration histories.

    `residuals[k]` is sqrt of the regularized objective at iterate k (this is
    the quantity conjugate gradients drives down monotonically);
    `normal_residuals[k]` is the relative normal-equations residual used for
    the stopping test.
    """

    cube: HyperCube
    residuals: np.ndarray
    normal_residuals: np.ndarray
    iterations: int


def _band_weights(psfs: PSFStack, sensor: SensorModel) -> np.ndarray:
    return np.array([sensor_response(sensor, w) for w in psfs.wavelengths])


def forward_op(cube: HyperCube, psfs: PSFStack, sensor: SensorModel) -> EncodedImage:
    """Noiseless encoding of the cube (the linear operator A)."""
    from .encoder import _check_grids

    _check_grids(cube, psfs)
    weights = _band_weights(psfs, sensor)
    return EncodedImage(convolve_bands(cube.data, psfs.kernels, weights))


def adjoint_op(image: EncodedImage, psfs: PSFStack, sensor: SensorModel) -> HyperCube:
    """Exact adjoint of `forward_op`: per-band correlation scaled by response."""
    height, width = image.data.shape
    if height > psfs.grid_size or width > psfs.grid_size:
        raise ValidationError(
            f"image dims {height}x{width} exceed PSF support {psfs.grid_size}"
        )
    weights = _band_weights(psfs, sensor)
    data = correlate_bands(image.data, psfs.kernels, weights)
    return HyperCube(data, psfs.wavelengths)


def _second_diff(x: np.ndarray) -> np.ndarray:
    # maps B bands to B-2 interior rows; empty when B < 3
    return x[:, :, :-2] - 2.0 * x[:, :, 1:-1] + x[:, :, 2:]


def _second_diff_adjoint(u: np.ndarray, bands: int) -> np.ndarray:
    out = np.zeros(u.shape[:2] + (bands,))
    out[:, :, :-2] += u
    out[:, :, 1:-1] -= 2.0 * u
    out[:, :, 2:] += u
    return out


def reconstruct_cg(
    image: EncodedImage, psfs: PSFStack, sensor: SensorModel, config: ReconConfig
) -> ReconResult:
    """Minimize the regularized least-squares objective by CG.

    Stops when the relative normal-equations residual drops below
    `config.tol` or after `config.max_iters` iterations.  Raises
    NumericError if the iteration produces non-finite values.
    """
    y = image.data
    height, width = y.shape
    if height > psfs.grid_size or width > psfs.grid_size:
        raise ValidationError(
            f"image dims {height}x{width} exceed PSF support {psfs.grid_size}"
        )
    weights = _band_weights(psfs, sensor)
    kernels = psfs.kernels
    bands = psfs.band_count
    alpha = config.reg_weight
    beta = config.spectral_smooth_weight

    def normal_op(x):
        out = correlate_bands(convolve_bands(x, kernels, weights), kernels, weights)
        if alpha > 0:
            out += alpha * x
        if beta > 0 and bands >= 3:
            out += beta * _second_diff_adjoint(_second_diff(x), bands)
        return out

    b = correlate_bands(y, kernels, weights)
    b_norm = float(np.linalg.norm(b))
    y_sq = float(np.vdot(y, y).real)

    def objective_residual(x, r):
        # ||Ax-y||^2 + alpha||x||^2 + beta||Dx||^2 == ||y||^2 - x.(b + r)
        # with r = b - M x, so no extra operator application is needed.
        val = y_sq - float(np.vdot(x, b + r).real)
        return float(np.sqrt(max(val, 0.0)))

    x = np.zeros((height, width, bands))
    r = b.copy()
    residuals = [objective_residual(x, r)]
    normal_residuals = [1.0 if b_norm > 0 else 0.0]
    if b_norm == 0.0:
        return ReconResult(
            HyperCube(x, psfs.wavelengths),
            np.array(residuals),
            np.array(normal_residuals),
            0,
        )

    p = r.copy()
    rho = float(np.vdot(r, r).real)
    iterations = 0
    for _ in range(config.max_iters):
        q = normal_op(p)
        denom = float(np.vdot(p, q).real)
        if not np.isfinite(denom) or denom <= 0.0:
            raise NumericError(
                f"conjugate gradient broke down (p.Mp = {denom}); "
                "the operator is not positive definite on this iterate"
            )
        step = rho / denom
        x += step * p
        r -= step * q
        iterations += 1
        rho_next = float(np.vdot(r, r).real)
        if not np.isfinite(rho_next):
            raise NumericError("conjugate gradient produced non-finite residual")
        residuals.append(objective_residual(x, r))
        rel = float(np.sqrt(rho_next)) / b_norm
        normal_residuals.append(rel)
        if rel < config.tol:
            break
        p = r + (rho_next / rho) * p
        rho = rho_next

    return ReconResult(
        HyperCube(x, psfs.wavelengths),
        np.array(residuals),
        np.array(normal_residuals),
        iterations,
    )


def save_residual_log(result: ReconResult, path) -> None:
    """Plain-text residual log: one `iteration residual` pair per line."""
    from . import _binio

    lines = "".join(
        f"{i} {res:.17g}\n" for i, res in enumerate(result.residuals)
    )
    _binio.write_atomic(path, lines.encode("ascii"))
