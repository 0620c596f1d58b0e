"""Drive the NIRSA reconstruction network end to end (forward pass only).

The network is a U-shaped spectral-attention transformer: attention tokens
are feature channels, so each head builds a channels-by-channels attention
map instead of a spatial one.  This demo initializes deterministic weights,
follows the feature shapes through the encoder/bottleneck/decoder chain,
round-trips the weight file, and evaluates the training-protocol helpers.

Run from the repository root:  python3 demos/04_network_forward.py
"""

import pathlib

import numpy as np

from nirsnap import (
    NetConfig,
    init_weights,
    l1_loss,
    load_image,
    load_weights,
    lr_schedule,
    nirsa_forward,
    save_weights,
)
from nirsnap.datacube import HyperCube

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

config = NetConfig()  # 32 base channels, blocks (2, 2, 2), heads (1, 2, 4)
weights = init_weights(config, seed=2024)
print(f"initialized {len(weights.tensors)} tensors, "
      f"{weights.parameter_count():,} parameters")

save_weights(weights, OUT / "weights.nsaw")
weights = load_weights(OUT / "weights.nsaw", config)
print(f"weight file round-trip OK ({(OUT / 'weights.nsaw').stat().st_size:,} bytes)")

encoded_path = OUT / "encoded_clean.nimg"
if encoded_path.exists():
    image = load_image(encoded_path)
    frame = image.data[:32, :32]
else:
    frame = np.random.default_rng(0).random((32, 32))

shape_log = []
cube = nirsa_forward(frame, weights, config, shape_log=shape_log)
print("\nfeature shape chain:")
for stage, shape in shape_log:
    print(f"  {stage:>9}: {shape}")
print(f"output cube: {cube.shape}, all nonnegative: {bool(np.all(cube.data >= 0))}")

# the training loop itself is out of scope, but its ingredients are here:
target = HyperCube(np.clip(cube.data + 0.05, 0, None), cube.wavelengths)
print(f"\nl1 loss against a shifted target: {l1_loss(cube, target):.4f}")
print("learning-rate schedule:",
      ", ".join(f"epoch {e}: {lr_schedule(e):.6f}" for e in (0, 29, 30, 90, 149)))
