"""Forward-pass reference implementation of the NIRSA spectral-attention
reconstruction network: a U-shaped transformer that maps one encoded sensor
image to a hyperspectral cube.

Topology (C = base_channels, defaults C=32, blocks (2, 2, 2), heads (1, 2, 4)):

    input H x W x 1
      in_proj   1x1 -> O1 (H x W x C)
      embed     3x3
      enc0      N1 NIR-SA blocks            -> O2  (H   x W   x C)
      down0     4x4 conv stride 2           ->     (H/2 x W/2 x 2C)
      enc1      N2 blocks                   -> O3
      down1     4x4 conv stride 2           ->     (H/4 x W/4 x 4C)
      mid       N3 blocks
      up1       2x2 transposed conv s2      -> O4  (H/2 x W/2 x 2C)
      fuse1     fusion(O3, O4)
      dec1      N2 blocks
      up0       2x2 transposed conv s2      -> O5  (H   x W   x C)
      fuse0     fusion(O2, O5)
      dec0      N1 blocks
      out_conv  3x3                         -> O6
      O6 + O1, head 1x1 (C -> out_bands), ReLU

A NIR-SA block is x1 = x + MSA(LN(x)); out = x1 + FFN(LN(x1)).  The MSA is
spectral-wise: tokens are channels, Q/K columns are L2-normalized over the
H*W axis, each head forms a (C/heads)^2 attention matrix softmax'd so that
columns sum to 1, scaled by a learnable per-head temperature.  The merged
attention output z is finished as out_proj(z) + conv3x3(z).  The FFN is a
1x1 expansion, GELU, 3x3 depthwise conv, GELU, 1x1 contraction.

Weight tensors are addressed by canonical dotted paths:

    in_proj                      (C, 1)            channel projection
    embed                        (C, C, 3, 3)      conv, zero-padded "same"
    <stage>.block<i>.ln1.gain    (Cb,)             stage in {enc0, enc1, mid,
    <stage>.block<i>.ln1.bias    (Cb,)              dec1, dec0}
    <stage>.block<i>.msa.q_proj  (Cb, Cb)          likewise k_proj, v_proj
    <stage>.block<i>.msa.temperature (heads,)
    <stage>.block<i>.msa.out_proj (Cb, Cb)
    <stage>.block<i>.msa.conv_res (Cb, Cb, 3, 3)
    <stage>.block<i>.ln2.{gain,bias} (Cb,)
    <stage>.block<i>.ffn.expand  (E*Cb, Cb)
    <stage>.block<i>.ffn.dw      (E*Cb, 1, 3, 3)   depthwise
    <stage>.block<i>.ffn.contract (Cb, E*Cb)
    down0                        (2C, C, 4, 4)     stride 2, pad 1
    down1                        (4C, 2C, 4, 4)
    up1                          (4C, 2C, 2, 2)    transposed, stride 2
    up0                          (2C, C, 2, 2)
    fuse{1,0}.cat_conv           (Cb, 2Cb, 3, 3)   input concat(shallow, deep)
    fuse{1,0}.shallow_conv       (Cb, Cb, 3, 3)
    fuse{1,0}.deep_conv          (Cb, Cb, 3, 3)
    fuse{1,0}.out_conv           (Cb, 2Cb, 3, 3)   input concat(deep_conv, M)
    out_conv                     (C, C, 3, 3)
    head                         (out_bands, C)

Heads split channels contiguously (head h owns channels [h*d, (h+1)*d)).
All convolutions and projections are bias-free; layer norms carry gain and
bias.  Feature maps are plain (H, W, C) float arrays.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from . import _binio
from .datacube import HyperCube
from .errors import (
    MissingTensorError,
    TensorShapeError,
    ValidationError,
)

NSAW_MAGIC = b"NSAW"

LN_EPS = 1e-6

BASE_LR = 5e-4
LR_DECAY = 0.9
LR_DECAY_EPOCHS = 30
TRAIN_EPOCHS = 150


@dataclass(frozen=True)
class NetConfig:
    base_channels: int = 32
    block_counts: tuple = (2, 2, 2)
    out_bands: int = 31
    heads_per_level: tuple = (1, 2, 4)
    ffn_expansion: int = 4

    def __post_init__(self):
        object.__setattr__(self, "block_counts", tuple(self.block_counts))
        object.__setattr__(self, "heads_per_level", tuple(self.heads_per_level))
        if self.base_channels < 1:
            raise ValidationError("base_channels must be >= 1")
        if len(self.block_counts) != 3 or any(n < 1 for n in self.block_counts):
            raise ValidationError("block_counts must be three counts >= 1")
        if len(self.heads_per_level) != 3:
            raise ValidationError("heads_per_level must have three entries")
        for h in self.heads_per_level:
            if h < 1 or self.base_channels % h != 0:
                raise ValidationError(
                    f"base_channels {self.base_channels} not divisible by heads {h}"
                )
        if self.out_bands < 1:
            raise ValidationError("out_bands must be >= 1")
        if self.ffn_expansion < 1:
            raise ValidationError("ffn_expansion must be >= 1")


class WeightSet:
    """Named f32 tensors keyed by canonical dotted paths."""

    def __init__(self, tensors: dict):
        self.tensors = {
            name: np.asarray(t, dtype=np.float32) for name, t in tensors.items()
        }

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise MissingTensorError(f"missing tensor {name}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __len__(self) -> int:
        return len(self.tensors)

    def scoped(self, prefix: str) -> dict:
        """Sub-view with `prefix.` stripped from matching tensor paths."""
        cut = len(prefix) + 1
        return {
            name[cut:]: t
            for name, t in self.tensors.items()
            if name.startswith(prefix + ".")
        }

    def parameter_count(self) -> int:
        return sum(t.size for t in self.tensors.values())


def _block_spec(prefix: str, channels: int, heads: int, expansion: int):
    e = expansion * channels
    return [
        (f"{prefix}.ln1.gain", (channels,), "gain"),
        (f"{prefix}.ln1.bias", (channels,), "bias"),
        (f"{prefix}.msa.q_proj", (channels, channels), "matrix"),
        (f"{prefix}.msa.k_proj", (channels, channels), "matrix"),
        (f"{prefix}.msa.v_proj", (channels, channels), "matrix"),
        (f"{prefix}.msa.temperature", (heads,), "temperature"),
        (f"{prefix}.msa.out_proj", (channels, channels), "matrix"),
        (f"{prefix}.msa.conv_res", (channels, channels, 3, 3), "conv"),
        (f"{prefix}.ln2.gain", (channels,), "gain"),
        (f"{prefix}.ln2.bias", (channels,), "bias"),
        (f"{prefix}.ffn.expand", (e, channels), "matrix"),
        (f"{prefix}.ffn.dw", (e, 1, 3, 3), "depthwise"),
        (f"{prefix}.ffn.contract", (channels, e), "matrix"),
    ]


def _fusion_spec(prefix: str, channels: int):
    return [
        (f"{prefix}.cat_conv", (channels, 2 * channels, 3, 3), "conv"),
        (f"{prefix}.shallow_conv", (channels, channels, 3, 3), "conv"),
        (f"{prefix}.deep_conv", (channels, channels, 3, 3), "conv"),
        (f"{prefix}.out_conv", (channels, 2 * channels, 3, 3), "conv"),
    ]


def weight_spec(config: NetConfig):
    """Canonical (path, shape, kind) list defining a complete WeightSet."""
    c = config.base_channels
    n1, n2, n3 = config.block_counts
    h0, h1, h2 = config.heads_per_level
    e = config.ffn_expansion
    spec = [("in_proj", (c, 1), "matrix"), ("embed", (c, c, 3, 3), "conv")]
    for i in range(n1):
        spec += _block_spec(f"enc0.block{i}", c, h0, e)
    spec.append(("down0", (2 * c, c, 4, 4), "conv"))
    for i in range(n2):
        spec += _block_spec(f"enc1.block{i}", 2 * c, h1, e)
    spec.append(("down1", (4 * c, 2 * c, 4, 4), "conv"))
    for i in range(n3):
        spec += _block_spec(f"mid.block{i}", 4 * c, h2, e)
    spec.append(("up1", (4 * c, 2 * c, 2, 2), "tconv"))
    spec += _fusion_spec("fuse1", 2 * c)
    for i in range(n2):
        spec += _block_spec(f"dec1.block{i}", 2 * c, h1, e)
    spec.append(("up0", (2 * c, c, 2, 2), "tconv"))
    spec += _fusion_spec("fuse0", c)
    for i in range(n1):
        spec += _block_spec(f"dec0.block{i}", c, h0, e)
    spec.append(("out_conv", (c, c, 3, 3), "conv"))
    spec.append(("head", (config.out_bands, c), "matrix"))
    return spec


def _fan_in(shape, kind: str) -> int:
    if kind == "matrix":
        return shape[1]
    if kind == "conv":
        return shape[1] * shape[2] * shape[3]
    if kind == "tconv":
        # (in, out, k, k): each output pixel sees one input pixel per channel
        return shape[0] * shape[2] * shape[3]
    if kind == "depthwise":
        return shape[2] * shape[3]
    raise ValidationError(f"no fan-in rule for kind {kind!r}")


def init_weights(config: NetConfig, seed: int) -> WeightSet:
    """Deterministic initialization: uniform fan-in scaling for weights,
    gain 1 / bias 0 for layer norms, temperature 1 per head."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for path, shape, kind in weight_spec(config):
        if kind == "gain" or kind == "temperature":
            tensors[path] = np.ones(shape, dtype=np.float32)
        elif kind == "bias":
            tensors[path] = np.zeros(shape, dtype=np.float32)
        else:
            bound = 1.0 / np.sqrt(_fan_in(shape, kind))
            tensors[path] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
    return WeightSet(tensors)


def validate_weights(weights: WeightSet, config: NetConfig) -> None:
    """Check the set is complete and every tensor has the configured shape."""
    expected = {path: shape for path, shape, _ in weight_spec(config)}
    for path, shape in expected.items():
        if path not in weights:
            raise MissingTensorError(f"missing tensor {path}")
        got = weights[path].shape
        if got != shape:
            raise TensorShapeError(
                f"shape mismatch for {path}: stored {got}, expected {shape}"
            )
    extra = set(weights.tensors) - set(expected)
    if extra:
        raise ValidationError(f"unexpected tensors: {sorted(extra)}")


# ---------------------------------------------------------------------------
# layer primitives (feature maps are (H, W, C) float arrays)
# ---------------------------------------------------------------------------


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def project(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """1x1 channel projection: weight (C_out, C_in)."""
    if x.shape[-1] != weight.shape[1]:
        raise ValidationError(
            f"projection expects {weight.shape[1]} channels, got {x.shape[-1]}"
        )
    return x @ weight.T.astype(np.float64)


def conv2d_same(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """3x3 convolution, zero padding 1, stride 1: weight (C_out, C_in, 3, 3)."""
    if weight.shape[2:] != (3, 3) or x.shape[2] != weight.shape[1]:
        raise ValidationError(
            f"conv weight {weight.shape} incompatible with input {x.shape}"
        )
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    win = sliding_window_view(xp, (3, 3), axis=(0, 1))
    return np.einsum("hwcij,ocij->hwo", win, weight.astype(np.float64), optimize=True)


def depthwise3x3(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Per-channel 3x3 convolution, padding 1: weight (C, 1, 3, 3)."""
    if weight.shape != (x.shape[2], 1, 3, 3):
        raise ValidationError(
            f"depthwise weight {weight.shape} incompatible with input {x.shape}"
        )
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    win = sliding_window_view(xp, (3, 3), axis=(0, 1))
    return np.einsum("hwcij,cij->hwc", win, weight[:, 0].astype(np.float64), optimize=True)


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Normalize each spatial position across channels, then scale and shift."""
    channels = x.shape[-1]
    if gain.shape != (channels,) or bias.shape != (channels,):
        raise ValidationError(
            f"layer norm gain/bias must have {channels} entries, "
            f"got {gain.shape} and {bias.shape}"
        )
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    normed = (x - mean) / np.sqrt(var + LN_EPS)
    return normed * gain.astype(np.float64) + bias.astype(np.float64)


def _softmax_columns(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def spectral_msa(x: np.ndarray, weights: dict, heads: int) -> np.ndarray:
    """Spectral-wise multi-head attention over channel tokens.

    Q, K, V are channel projections of the flattened (H*W, C) input; Q and K
    columns are L2-normalized over the spatial axis (zero columns stay zero);
    each head's (d x d) attention matrix is softmax'd so columns sum to 1.
    The merged output z is finished as out_proj(z) + conv3x3(z).
    """
    height, width, channels = x.shape
    if channels % heads != 0:
        raise ValidationError(f"{channels} channels not divisible by {heads} heads")
    d = channels // heads
    tokens = x.reshape(height * width, channels)
    q = tokens @ weights["q_proj"].T.astype(np.float64)
    k = tokens @ weights["k_proj"].T.astype(np.float64)
    v = tokens @ weights["v_proj"].T.astype(np.float64)
    temperature = weights["temperature"].astype(np.float64)
    if temperature.shape != (heads,):
        raise ValidationError(
            f"temperature must have {heads} entries, got {temperature.shape}"
        )
    merged = np.empty_like(q)
    for h in range(heads):
        sl = slice(h * d, (h + 1) * d)
        qh, kh, vh = q[:, sl], k[:, sl], v[:, sl]
        qn = np.linalg.norm(qh, axis=0)
        kn = np.linalg.norm(kh, axis=0)
        qh = qh / np.where(qn > 0, qn, 1.0)
        kh = kh / np.where(kn > 0, kn, 1.0)
        attn = _softmax_columns(temperature[h] * (kh.T @ qh))
        merged[:, sl] = vh @ attn
    z = merged.reshape(height, width, channels)
    return project(z, weights["out_proj"]) + conv2d_same(z, weights["conv_res"])


def ffn(x: np.ndarray, weights: dict) -> np.ndarray:
    """1x1 expand, GELU, 3x3 depthwise, GELU, 1x1 contract."""
    t = gelu(project(x, weights["expand"]))
    t = gelu(depthwise3x3(t, weights["dw"]))
    return project(t, weights["contract"])


def _scoped(weights: dict, prefix: str) -> dict:
    cut = len(prefix) + 1
    return {k[cut:]: v for k, v in weights.items() if k.startswith(prefix + ".")}


def nir_sa_block(x: np.ndarray, weights: dict, heads: int) -> np.ndarray:
    """x1 = x + MSA(LN(x)); out = x1 + FFN(LN(x1))."""
    normed = layer_norm(x, weights["ln1.gain"], weights["ln1.bias"])
    x1 = x + spectral_msa(normed, _scoped(weights, "msa"), heads)
    normed = layer_norm(x1, weights["ln2.gain"], weights["ln2.bias"])
    return x1 + ffn(normed, _scoped(weights, "ffn"))


def resample_features(x: np.ndarray, direction: str, weight: np.ndarray) -> np.ndarray:
    """Down: 4x4 conv, stride 2, pad 1, C -> 2C.  Up: 2x2 transposed conv,
    stride 2, C -> C/2."""
    height, width, channels = x.shape
    if direction == "down":
        if height % 2 or width % 2:
            raise ValidationError(
                f"downsampling requires even spatial dims, got {height}x{width}"
            )
        if weight.shape != (2 * channels, channels, 4, 4):
            raise ValidationError(
                f"down weight {weight.shape} incompatible with {channels} channels"
            )
        xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
        win = sliding_window_view(xp, (4, 4), axis=(0, 1))[::2, ::2]
        return np.einsum("hwcij,ocij->hwo", win, weight.astype(np.float64), optimize=True)
    if direction == "up":
        if channels % 2:
            raise ValidationError(f"upsampling requires even channels, got {channels}")
        if weight.shape != (channels, channels // 2, 2, 2):
            raise ValidationError(
                f"up weight {weight.shape} incompatible with {channels} channels"
            )
        t = np.einsum("hwc,coij->hwoij", x, weight.astype(np.float64), optimize=True)
        out = t.transpose(0, 3, 1, 4, 2)
        return out.reshape(2 * height, 2 * width, channels // 2)
    raise ValidationError(f"direction must be 'down' or 'up', got {direction!r}")


def nir_fusion(shallow: np.ndarray, deep: np.ndarray, weights: dict) -> np.ndarray:
    """Three-stage convolutional merge of same-shape shallow and deep maps."""
    if shallow.shape != deep.shape:
        raise ValidationError(
            f"fusion inputs must match, got {shallow.shape} and {deep.shape}"
        )
    merged = conv2d_same(np.concatenate([shallow, deep], axis=2), weights["cat_conv"])
    merged += conv2d_same(shallow, weights["shallow_conv"])
    stacked = np.concatenate([conv2d_same(deep, weights["deep_conv"]), merged], axis=2)
    return conv2d_same(stacked, weights["out_conv"])


def default_band_grid(out_bands: int) -> np.ndarray:
    """Wavelength grid assigned to network output: 700 nm up in 10 nm steps."""
    return 700e-9 + 10e-9 * np.arange(out_bands)


def nirsa_forward(
    image,
    weights: WeightSet,
    config: NetConfig,
    wavelengths=None,
    shape_log: list = None,
) -> HyperCube:
    """Run the network on one encoded image; returns a nonnegative cube.

    `image` is an EncodedImage or a 2-D array with H and W divisible by 4.
    `shape_log`, when given, collects (stage, shape) pairs for inspection.
    """
    data = np.asarray(getattr(image, "data", image), dtype=np.float64)
    if data.ndim != 2:
        raise ValidationError(f"network input must be 2-D, got shape {data.shape}")
    height, width = data.shape
    if height % 4 or width % 4:
        raise ValidationError(
            f"input dims must be divisible by 4, got {height}x{width}"
        )
    validate_weights(weights, config)
    c = config.base_channels
    n1, n2, n3 = config.block_counts
    h0, h1, h2 = config.heads_per_level

    def log(stage, t):
        if shape_log is not None:
            shape_log.append((stage, t.shape))
        return t

    def run_blocks(t, stage, count, heads):
        for i in range(count):
            t = nir_sa_block(t, weights.scoped(f"{stage}.block{i}"), heads)
        return log(stage, t)

    o1 = log("in_proj", project(data[:, :, None], weights["in_proj"]))
    t = log("embed", conv2d_same(o1, weights["embed"]))
    o2 = run_blocks(t, "enc0", n1, h0)
    t = log("down0", resample_features(o2, "down", weights["down0"]))
    o3 = run_blocks(t, "enc1", n2, h1)
    t = log("down1", resample_features(o3, "down", weights["down1"]))
    t = run_blocks(t, "mid", n3, h2)
    o4 = log("up1", resample_features(t, "up", weights["up1"]))
    t = log("fuse1", nir_fusion(o3, o4, weights.scoped("fuse1")))
    t = run_blocks(t, "dec1", n2, h1)
    o5 = log("up0", resample_features(t, "up", weights["up0"]))
    t = log("fuse0", nir_fusion(o2, o5, weights.scoped("fuse0")))
    t = run_blocks(t, "dec0", n1, h0)
    o6 = log("out_conv", conv2d_same(t, weights["out_conv"]))
    t = log("head", project(o6 + o1, weights["head"]))
    out = np.maximum(t, 0.0)
    if wavelengths is None:
        wavelengths = default_band_grid(config.out_bands)
    return HyperCube(out, wavelengths)


# ---------------------------------------------------------------------------
# weight serialization (NSAW)
# ---------------------------------------------------------------------------


def save_weights(weights: WeightSet, path) -> None:
    """Write the NSAW format: tensors in sorted path order."""
    parts = [NSAW_MAGIC, _binio.pack("I", len(weights))]
    for name in sorted(weights.tensors):
        t = weights.tensors[name]
        encoded = name.encode("utf-8")
        parts.append(_binio.pack("H", len(encoded)))
        parts.append(encoded)
        parts.append(_binio.pack("B", t.ndim))
        parts.append(_binio.pack(f"{t.ndim}I", *t.shape))
        parts.append(_binio.f32_bytes(t))
    _binio.write_atomic(path, b"".join(parts))


def load_weights(path, config: NetConfig) -> WeightSet:
    """Read an NSAW file and validate it against the configuration."""
    r = _binio.Reader(_binio.read_file(path), path)
    r.expect_magic(NSAW_MAGIC)
    (count,) = r.unpack("I")
    tensors = {}
    for _ in range(count):
        (name_len,) = r.unpack("H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("B")
        dims = r.unpack(f"{ndim}I") if ndim else ()
        total = int(np.prod(dims, dtype=np.int64)) if dims else 1
        tensors[name] = r.f32_array(total, f"tensor {name}").reshape(dims)
    r.expect_eof()
    weights = WeightSet(tensors)
    validate_weights(weights, config)
    return weights


# ---------------------------------------------------------------------------
# training-protocol helpers (the training loop itself lives elsewhere)
# ---------------------------------------------------------------------------


def l1_loss(pred: HyperCube, truth: HyperCube) -> float:
    """Mean absolute error over all voxels."""
    if pred.shape != truth.shape:
        raise ValidationError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean(np.abs(pred.data - truth.data)))


def lr_schedule(epoch: int) -> float:
    """Step-decay learning rate: 5e-4 scaled by 0.9 every 30 epochs."""
    if not 0 <= epoch < TRAIN_EPOCHS:
        raise ValidationError(
            f"epoch must lie in [0, {TRAIN_EPOCHS}), got {epoch}"
        )
    return BASE_LR * LR_DECAY ** (epoch // LR_DECAY_EPOCHS)
