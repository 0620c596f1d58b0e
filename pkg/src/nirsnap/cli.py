"""Command-line pipeline driver.

Subcommands chain the full system together through artifact files:

    doe          radial profile (text)          -> quantized+perturbed NDOE
    psf          NDOE                           -> NPSF stack
    synth        scene JSON                     -> NCUB datacube
    encode       NCUB + NPSF                    -> NIMG sensor image
    reconstruct  NIMG + (NPSF | NSAW)           -> NCUB reconstruction
    metrics      NCUB + NCUB                    -> JSON on stdout
    export-band  NCUB                           -> 16-bit PNG

Configuration is a single JSON document with sections (all optional,
unknown keys rejected): seed, optics, doe, material, sensor, recon, net.
The global seed feeds each stochastic stage through fixed offsets
(fabrication error +1, sensor noise +2, weight init +3) so stages are
independently reproducible.

Exit codes: 0 success, 2 validation failure, 3 I/O failure, 4 numeric
failure (non-finite values).
"""

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass

import numpy as np

from .datacube import export_band, load_cube, save_cube, scene_from_json, synth_scene
from .doe import (
    DoeFabSpec,
    MaterialModel,
    apply_fabrication_error,
    load_height_map,
    load_profile_txt,
    quantize_height,
    rotate_radial_profile,
    save_height_map,
)
from .encoder import SensorModel, encode, load_image, save_image
from .errors import NumericError, ValidationError
from .metrics import metrics_report, report_to_json
from .nirsa import NetConfig, load_weights, nirsa_forward
from .propagation import OpticalConfig, compute_psf_stack, load_psf_stack, save_psf_stack
from .recon import ReconConfig, reconstruct_cg, save_residual_log

FAB_SEED_OFFSET = 1
NOISE_SEED_OFFSET = 2
WEIGHTS_SEED_OFFSET = 3


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    optics: OpticalConfig
    fab: DoeFabSpec
    aperture_radius: float
    substrate_thickness: float
    material: MaterialModel
    sensor: SensorModel
    recon: ReconConfig
    net: NetConfig


def _check_keys(section: dict, allowed, where: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {sorted(unknown)}")


def _section(doc: dict, name: str) -> dict:
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise ValidationError(f"config section {name!r} must be an object")
    return value


def load_pipeline_config(path=None) -> PipelineConfig:
    """Parse the pipeline config JSON; every field has a default."""
    doc = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ValidationError("config document must be a JSON object")
    _check_keys(
        doc, {"seed", "optics", "doe", "material", "sensor", "recon", "net"}, "config"
    )

    optics_doc = _section(doc, "optics")
    _check_keys(
        optics_doc,
        {
            "source_distance",
            "propagation_distance",
            "lambda_min",
            "lambda_max",
            "lambda_step",
            "grid_size",
            "pixel_pitch",
            "paraxial_half_factor",
            "physical_rescale",
        },
        "optics",
    )
    optics = OpticalConfig(**optics_doc)

    doe_doc = _section(doc, "doe")
    _check_keys(
        doe_doc,
        {"levels", "total_depth", "error_bound", "aperture_radius", "substrate_thickness"},
        "doe",
    )
    aperture_radius = float(doe_doc.pop("aperture_radius", 2.048e-3))
    # recorded for provenance only; a flat substrate adds a constant phase
    # that cancels in the PSF intensity
    substrate = float(doe_doc.pop("substrate_thickness", 2e-3))
    fab = DoeFabSpec(**doe_doc)

    material_doc = _section(doc, "material")
    _check_keys(material_doc, {"mode", "constant_index"}, "material")
    material = MaterialModel(**material_doc)

    sensor_doc = dict(_section(doc, "sensor"))
    _check_keys(sensor_doc, {"response_curve", "noise_sigma", "noise_kind"}, "sensor")
    if "response_curve" in sensor_doc:
        sensor_doc["response_curve"] = tuple(
            (float(w), float(v)) for w, v in sensor_doc["response_curve"]
        )
    sensor = SensorModel(**sensor_doc)

    recon_doc = _section(doc, "recon")
    _check_keys(
        recon_doc, {"reg_weight", "spectral_smooth_weight", "max_iters", "tol"}, "recon"
    )
    recon = ReconConfig(**recon_doc)

    net_doc = dict(_section(doc, "net"))
    _check_keys(
        net_doc,
        {"base_channels", "block_counts", "out_bands", "heads_per_level", "ffn_expansion"},
        "net",
    )
    for key in ("block_counts", "heads_per_level"):
        if key in net_doc:
            net_doc[key] = tuple(net_doc[key])
    net = NetConfig(**net_doc)

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ValidationError(f"seed must be a nonnegative integer, got {seed!r}")

    return PipelineConfig(
        seed, optics, fab, aperture_radius, substrate, material, sensor, recon, net
    )


def _config_for(args) -> PipelineConfig:
    cfg = load_pipeline_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ValidationError(f"seed must be nonnegative, got {args.seed}")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def cmd_doe(args) -> int:
    cfg = _config_for(args)
    profile = load_profile_txt(args.profile, sample_pitch=cfg.optics.pixel_pitch)
    height_map = rotate_radial_profile(
        profile, cfg.optics.grid_size, cfg.optics.pixel_pitch, cfg.aperture_radius
    )
    quantized = quantize_height(height_map, cfg.fab)
    perturbed = apply_fabrication_error(quantized, cfg.fab, cfg.seed + FAB_SEED_OFFSET)
    save_height_map(perturbed, args.out)
    levels_used = np.unique(np.rint(quantized.heights / cfg.fab.step)).size
    print(
        f"wrote {args.out}: {perturbed.grid_size}x{perturbed.grid_size} map, "
        f"{levels_used}/{cfg.fab.levels} levels used, "
        f"heights {perturbed.heights.min() * 1e9:.1f}-"
        f"{perturbed.heights.max() * 1e9:.1f} nm"
    )
    return 0


def cmd_psf(args) -> int:
    cfg = _config_for(args)
    height_map = load_height_map(args.doe)
    stack = compute_psf_stack(cfg.optics, height_map, cfg.material)
    save_psf_stack(stack, args.out)
    print(
        f"wrote {args.out}: {stack.band_count} slices of "
        f"{stack.grid_size}x{stack.grid_size}, "
        f"{stack.wavelengths[0] * 1e9:.0f}-{stack.wavelengths[-1] * 1e9:.0f} nm"
    )
    return 0


def cmd_synth(args) -> int:
    cfg = _config_for(args)
    with open(args.scene, "r", encoding="utf-8") as fh:
        spec, height, width = scene_from_json(fh.read())
    cube = synth_scene(spec, height, width, cfg.optics.wavelengths)
    save_cube(cube, args.out)
    print(f"wrote {args.out}: {height}x{width}x{cube.band_count} cube")
    return 0


def cmd_encode(args) -> int:
    cfg = _config_for(args)
    cube = load_cube(args.cube)
    psfs = load_psf_stack(args.psf)
    image = encode(cube, psfs, cfg.sensor, cfg.seed + NOISE_SEED_OFFSET)
    save_image(image, args.out)
    print(f"wrote {args.out}: {image.data.shape[0]}x{image.data.shape[1]} image")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _config_for(args)
    image = load_image(args.image)
    if args.mode == "cg":
        psfs = load_psf_stack(args.operator)
        result = reconstruct_cg(image, psfs, cfg.sensor, cfg.recon)
        save_cube(result.cube, args.out)
        save_residual_log(result, f"{args.out}.residuals.txt")
        print(
            f"wrote {args.out}: {result.iterations} iterations, final relative "
            f"residual {result.normal_residuals[-1]:.3e}"
        )
        return 0
    if cfg.net.out_bands != cfg.optics.band_count:
        raise ValidationError(
            f"net out_bands {cfg.net.out_bands} != optics band count "
            f"{cfg.optics.band_count}"
        )
    weights = load_weights(args.operator, cfg.net)
    cube = nirsa_forward(image, weights, cfg.net, wavelengths=cfg.optics.wavelengths)
    save_cube(cube, args.out)
    print(f"wrote {args.out}: {cube.shape[0]}x{cube.shape[1]}x{cube.band_count} cube")
    return 0


def cmd_metrics(args) -> int:
    recon = load_cube(args.recon)
    truth = load_cube(args.truth)
    report = metrics_report(recon, truth)
    text = report_to_json(report)
    print(text)
    if args.out:
        from . import _binio

        _binio.write_atomic(args.out, text.encode("ascii"))
    return 0


def cmd_export_band(args) -> int:
    cube = load_cube(args.cube)
    export_band(cube, args.band, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nirsnap",
        description="snapshot NIR hyperspectral imaging pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", default=None, help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        if out_required:
            p.add_argument("--out", required=True, help="output artifact path")

    p = sub.add_parser("doe", help="generate the quantized, perturbed element map")
    p.add_argument("profile", help="512-line radial profile text file")
    common(p)
    p.set_defaults(func=cmd_doe)

    p = sub.add_parser("psf", help="compute the per-band PSF stack")
    p.add_argument("doe", help="NDOE height map")
    common(p)
    p.set_defaults(func=cmd_psf)

    p = sub.add_parser("synth", help="render a synthetic scene datacube")
    p.add_argument("scene", help="scene JSON document")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="encode a datacube into one sensor image")
    p.add_argument("cube", help="NCUB datacube")
    p.add_argument("psf", help="NPSF stack")
    common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("reconstruct", help="reconstruct a datacube from an image")
    p.add_argument("image", help="NIMG encoded image")
    p.add_argument("operator", help="NPSF stack (cg) or NSAW weights (nirsa)")
    p.add_argument("--mode", choices=("cg", "nirsa"), required=True)
    common(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("metrics", help="print quality metrics JSON")
    p.add_argument("recon", help="reconstructed NCUB")
    p.add_argument("truth", help="ground-truth NCUB")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out", default=None, help="also write the JSON here")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("export-band", help="export one band as 16-bit PNG")
    p.add_argument("cube", help="NCUB datacube")
    p.add_argument("band", type=int, help="band index")
    common(p)
    p.set_defaults(func=cmd_export_band)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
