"""Render a synthetic NIR scene and encode it into one sensor image.

The scene has two materials that look identical in a single band but have
different near-infrared behaviour: one with reflectance that falls off above
900 nm (vegetation-like) and one that stays flat.  Encoding convolves each
band with its PSF, weights by the sensor response, and sums, so the single
output image mixes every band.

Run from the repository root:  python3 demos/02_scene_and_encoding.py
(expects demos/out/psfs.npsf from demo 01; it will be built if missing)
"""

import pathlib
import subprocess
import sys

import numpy as np

from nirsnap import (
    Patch,
    SceneSpec,
    SensorModel,
    encode,
    load_psf_stack,
    save_cube,
    save_image,
    synth_scene,
)
from nirsnap.encoder import export_image_png
from nirsnap.metrics import save_signature_csv, spectral_signature

OUT = pathlib.Path(__file__).parent / "out"
stack_path = OUT / "psfs.npsf"
if not stack_path.exists():
    subprocess.run(
        [sys.executable, str(pathlib.Path(__file__).parent / "01_element_and_psfs.py")],
        check=True,
    )

stack = load_psf_stack(stack_path)

scene = SceneSpec(
    patches=(
        # vegetation-like: strong at 700-900 nm, falling beyond
        Patch((8, 8, 20, 20), {"kind": "gaussian", "center": 800e-9,
                               "width": 90e-9, "peak": 0.85}),
        # painted box: spectrally flat ramp, slightly rising
        Patch((36, 28, 20, 24), {"kind": "ramp", "start": 0.55, "stop": 0.7}),
    ),
    background=0.03,
)
cube = synth_scene(scene, 64, 64, stack.wavelengths)
save_cube(cube, OUT / "scene.ncub")

for label, (x, y) in {"vegetation": (16, 16), "box": (44, 40)}.items():
    save_signature_csv(cube, x, y, OUT / f"signature_{label}.csv")
    sig = spectral_signature(cube, x, y)
    print(f"{label:>10} signature: "
          + " ".join(f"{v:.2f}" for v in sig[:: max(1, len(sig) // 8)]))

quiet = SensorModel(noise_kind="none")
noisy = SensorModel(noise_sigma=0.01, noise_kind="gaussian")

clean_image = encode(cube, stack, quiet)
noisy_image = encode(cube, stack, noisy, seed=42)
save_image(clean_image, OUT / "encoded_clean.nimg")
save_image(noisy_image, OUT / "encoded_noisy.nimg")
export_image_png(clean_image, OUT / "encoded_clean.png")
export_image_png(noisy_image, OUT / "encoded_noisy.png")

print(f"\nencoded image range: [{clean_image.data.min():.4f}, "
      f"{clean_image.data.max():.4f}]")
print(f"noise rms added: {np.std(noisy_image.data - clean_image.data):.5f}")
print(f"wrote scene, signature CSVs, and encoded images to {OUT}/")
