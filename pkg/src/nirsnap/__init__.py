"""nirsnap: snapshot near-infrared hyperspectral imaging toolkit.

Simulates a diffractive-element snapshot camera end to end: rotationally
symmetric element generation, per-band PSF computation by single-FFT
propagation, spectral encoding of datacubes onto one sensor image, and
reconstruction by either regularized least squares or the NIRSA
spectral-attention network (forward pass).
"""

from .datacube import (
    HyperCube,
    Patch,
    SceneSpec,
    export_band,
    load_cube,
    save_cube,
    scene_from_json,
    synth_scene,
)
from .doe import (
    DoeFabSpec,
    HeightMap,
    MaterialModel,
    RadialProfile,
    apply_fabrication_error,
    load_height_map,
    load_profile_txt,
    quantize_height,
    refractive_index,
    rotate_radial_profile,
    save_height_map,
    save_profile_txt,
)
from .encoder import (
    EncodedImage,
    SensorModel,
    add_noise,
    encode,
    load_image,
    save_image,
    sensor_response,
)
from .errors import (
    BadMagicError,
    FileFormatError,
    MissingTensorError,
    NumericError,
    SizeMismatchError,
    TensorShapeError,
    TruncatedFileError,
    ValidationError,
)
from .metrics import SsimParams, metrics_report, psnr, spectral_signature, ssim
from .nirsa import (
    NetConfig,
    WeightSet,
    init_weights,
    l1_loss,
    load_weights,
    lr_schedule,
    nirsa_forward,
    save_weights,
)
from .propagation import (
    ComplexField,
    OpticalConfig,
    PSFStack,
    apply_doe,
    compute_psf_stack,
    load_psf_stack,
    point_source_field,
    propagate_to_sensor,
    save_psf_stack,
)
from .recon import ReconConfig, ReconResult, adjoint_op, forward_op, reconstruct_cg

__version__ = "0.1.0"
