"""From-scratch forward inference for the grasp-map network.

Activations are float32 arrays in (channels, height, width) layout. The
default architecture is an encoder/decoder: a full-resolution 16-filter
conv, three stride-2 convs down to 128 channels at 1/8 resolution, six
residual blocks, three stride-2 transposed convs back to full resolution
and four linear 1x1 heads producing the quality, cos(2 phi), sin(2 phi)
and width planes.

Convolutions are im2col + matmul; the tests hold them to naive
loop oracles. Weight bundles serialize to a small binary format
(docs/formats.md) that round-trips bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grasp_geometry import GraspMap, WIDTH_SCALE_PX

HEAD_NAMES = ("quality", "cos2phi", "sin2phi", "width")

WEIGHT_MAGIC = b"GGRW"


class ShapeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# layer primitives

def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
           stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlation. weight is (out_ch, in_ch, kh, kw);
    output spatial size is floor((H + 2p - k) / stride) + 1."""
    cin, H, W = x.shape
    cout, cin_w, kh, kw = weight.shape
    if cin != cin_w:
        raise ShapeError(f"conv2d: input has {cin} channels, weight expects {cin_w}")
    if bias.shape != (cout,):
        raise ShapeError("conv2d: bias shape mismatch")
    Ho = (H + 2 * padding - kh) // stride + 1
    Wo = (W + 2 * padding - kw) // stride + 1
    if Ho < 1 or Wo < 1:
        raise ShapeError("conv2d: kernel larger than padded input")
    if padding:
        xp = np.zeros((cin, H + 2 * padding, W + 2 * padding), dtype=x.dtype)
        xp[:, padding:padding + H, padding:padding + W] = x
    else:
        xp = x
    cols = _im2col(xp, kh, kw, stride, Ho, Wo)                 # (cin*kh*kw, Ho*Wo)
    out = weight.reshape(cout, -1).astype(np.float32) @ cols   # (cout, Ho*Wo)
    out += bias.astype(np.float32)[:, None]
    return np.ascontiguousarray(out.reshape(cout, Ho, Wo))


def _im2col(xp, kh, kw, stride, Ho, Wo):
    cin = xp.shape[0]
    sc, sh, sw = xp.strides
    shape = (cin, kh, kw, Ho, Wo)
    strides = (sc, sh, sw, sh * stride, sw * stride)
    patches = np.lib.stride_tricks.as_strided(xp, shape=shape, strides=strides)
    return patches.reshape(cin * kh * kw, Ho * Wo)


def conv_transpose2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
                     stride: int = 1, padding: int = 0) -> np.ndarray:
    """Transposed convolution (gradient of conv2d w.r.t. its input).

    weight is (in_ch, out_ch, kh, kw); output spatial size is
    (H - 1) * stride - 2p + k. Implemented as zero-dilation of the input
    followed by a stride-1 convolution with the spatially flipped kernel.
    """
    cin, H, W = x.shape
    cin_w, cout, kh, kw = weight.shape
    if cin != cin_w:
        raise ShapeError(f"conv_transpose2d: input has {cin} channels, weight expects {cin_w}")
    Ho = (H - 1) * stride - 2 * padding + kh
    Wo = (W - 1) * stride - 2 * padding + kw
    if Ho < 1 or Wo < 1:
        raise ShapeError("conv_transpose2d: empty output")
    Hd = (H - 1) * stride + 1
    Wd = (W - 1) * stride + 1
    dilated = np.zeros((cin, Hd, Wd), dtype=x.dtype)
    dilated[:, ::stride, ::stride] = x
    flipped = weight[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    return conv2d(dilated, np.ascontiguousarray(flipped), bias,
                  stride=1, padding=kh - 1 - padding)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def residual_block(x: np.ndarray, w1, b1, w2, b2) -> np.ndarray:
    """x + conv(relu(conv(x))); both convs preserve shape (k=3, p=1)."""
    inner = conv2d(x, w1, b1, stride=1, padding=1)
    out = conv2d(relu(inner), w2, b2, stride=1, padding=1)
    if out.shape != x.shape:
        raise ShapeError("residual block must preserve activation shape")
    return x + out


# ---------------------------------------------------------------------------
# network description

@dataclass(frozen=True)
class LayerSpec:
    kind: str              # "conv" | "residual" | "transpose"
    name: str
    filters: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1
    activation: bool = True


@dataclass(frozen=True)
class NetworkSpec:
    input_channels: int
    input_size: int
    layers: tuple
    heads: tuple = HEAD_NAMES
    head_kernel: int = 1


def default_network_spec() -> NetworkSpec:
    """The stock grasp network: 400x400 input, 16/32/64/128 filter stages,
    six 128-channel residual blocks, mirrored transposed convs, four heads."""
    layers = (
        LayerSpec("conv", "enc1", 16, kernel=9, stride=1, padding=4),
        LayerSpec("conv", "enc2", 32, kernel=4, stride=2, padding=1),
        LayerSpec("conv", "enc3", 64, kernel=4, stride=2, padding=1),
        LayerSpec("conv", "enc4", 128, kernel=4, stride=2, padding=1),
        LayerSpec("residual", "res1", 128),
        LayerSpec("residual", "res2", 128),
        LayerSpec("residual", "res3", 128),
        LayerSpec("residual", "res4", 128),
        LayerSpec("residual", "res5", 128),
        LayerSpec("residual", "res6", 128),
        LayerSpec("transpose", "dec1", 64, kernel=4, stride=2, padding=1),
        LayerSpec("transpose", "dec2", 32, kernel=4, stride=2, padding=1),
        LayerSpec("transpose", "dec3", 16, kernel=4, stride=2, padding=1),
    )
    return NetworkSpec(input_channels=1, input_size=400, layers=layers)


def spec_shape_chain(spec: NetworkSpec) -> list[tuple[str, int, int]]:
    """(layer name, channels, spatial size) after every layer, heads last."""
    c, s = spec.input_channels, spec.input_size
    chain = [("input", c, s)]
    for layer in spec.layers:
        if layer.kind == "conv":
            s = (s + 2 * layer.padding - layer.kernel) // layer.stride + 1
            c = layer.filters
        elif layer.kind == "transpose":
            s = (s - 1) * layer.stride - 2 * layer.padding + layer.kernel
            c = layer.filters
        elif layer.kind == "residual":
            if layer.filters != c:
                raise ShapeError(
                    f"layer {layer.name}: residual filters {layer.filters} != input channels {c}")
        else:
            raise ShapeError(f"layer {layer.name}: unknown kind {layer.kind!r}")
        if s < 1:
            raise ShapeError(f"layer {layer.name}: collapsed spatial size")
        chain.append((layer.name, c, s))
    for head in spec.heads:
        chain.append((f"head_{head}", 1, s))
    return chain


def weight_shapes(spec: NetworkSpec) -> dict[str, tuple]:
    """Expected name -> shape map for a bundle implementing the spec."""
    shapes = {}
    c = spec.input_channels
    for layer in spec.layers:
        if layer.kind == "conv":
            shapes[f"{layer.name}.weight"] = (layer.filters, c, layer.kernel, layer.kernel)
            shapes[f"{layer.name}.bias"] = (layer.filters,)
            c = layer.filters
        elif layer.kind == "transpose":
            shapes[f"{layer.name}.weight"] = (c, layer.filters, layer.kernel, layer.kernel)
            shapes[f"{layer.name}.bias"] = (layer.filters,)
            c = layer.filters
        elif layer.kind == "residual":
            for half in ("a", "b"):
                shapes[f"{layer.name}{half}.weight"] = (c, c, 3, 3)
                shapes[f"{layer.name}{half}.bias"] = (c,)
    for head in spec.heads:
        shapes[f"head_{head}.weight"] = (1, c, spec.head_kernel, spec.head_kernel)
        shapes[f"head_{head}.bias"] = (1,)
    return shapes


# ---------------------------------------------------------------------------
# weight bundles

class WeightBundle:
    """Ordered name -> float32 tensor map with binary (de)serialization."""

    def __init__(self, entries: dict[str, np.ndarray]):
        self.entries = {}
        for name, tensor in entries.items():
            arr = np.ascontiguousarray(tensor, dtype=np.float32)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"tensor {name!r} contains non-finite values")
            self.entries[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def save(self, path):
        with open(path, "wb") as f:
            f.write(WEIGHT_MAGIC)
            f.write(struct.pack("<I", len(self.entries)))
            for name, tensor in self.entries.items():
                encoded = name.encode("utf-8")
                f.write(struct.pack("<H", len(encoded)))
                f.write(encoded)
                f.write(struct.pack("<B", tensor.ndim))
                f.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
                f.write(tensor.astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "WeightBundle":
        with open(path, "rb") as f:
            if f.read(4) != WEIGHT_MAGIC:
                raise ValueError(f"{path}: bad weight file magic")
            (count,) = struct.unpack("<I", f.read(4))
            entries = {}
            for _ in range(count):
                (name_len,) = struct.unpack("<H", f.read(2))
                name = f.read(name_len).decode("utf-8")
                (rank,) = struct.unpack("<B", f.read(1))
                shape = struct.unpack(f"<{rank}I", f.read(4 * rank))
                n = int(np.prod(shape)) if rank else 1
                data = np.frombuffer(f.read(4 * n), dtype="<f4").reshape(shape)
                entries[name] = data
        return cls(entries)


def random_weights(spec: NetworkSpec, rng_seed: int = 0) -> WeightBundle:
    """He-style random initialization for every tensor the spec needs."""
    rng = np.random.default_rng(rng_seed)
    entries = {}
    for name, shape in weight_shapes(spec).items():
        if name.endswith(".bias"):
            entries[name] = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            entries[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape
                                       ).astype(np.float32)
    return WeightBundle(entries)


# ---------------------------------------------------------------------------
# predictors

class NetworkPredictor:
    """Immutable forward-pass engine; safe for concurrent predict calls."""

    def __init__(self, spec: NetworkSpec, weights: WeightBundle):
        expected = weight_shapes(spec)
        for name, shape in expected.items():
            if name not in weights:
                raise ShapeError(f"weight bundle is missing tensor {name!r}")
            if weights[name].shape != shape:
                raise ShapeError(
                    f"tensor {name!r}: bundle shape {weights[name].shape}, spec needs {shape}")
        spec_shape_chain(spec)      # validates the layer chain end to end
        self.spec = spec
        self.weights = weights

    @property
    def input_size(self) -> int:
        return self.spec.input_size

    def predict(self, x: np.ndarray) -> GraspMap:
        """Run the forward pass on a (1, H, W) mean-centered depth input."""
        x = np.asarray(x, dtype=np.float32)
        if x.ndim == 2:
            x = x[None]
        expected = (self.spec.input_channels, self.spec.input_size, self.spec.input_size)
        if x.shape != expected:
            raise ShapeError(f"input shape {x.shape}, spec needs {expected}")
        w = self.weights
        for layer in self.spec.layers:
            if layer.kind == "conv":
                x = conv2d(x, w[f"{layer.name}.weight"], w[f"{layer.name}.bias"],
                           stride=layer.stride, padding=layer.padding)
                if layer.activation:
                    x = relu(x)
            elif layer.kind == "transpose":
                x = conv_transpose2d(x, w[f"{layer.name}.weight"], w[f"{layer.name}.bias"],
                                     stride=layer.stride, padding=layer.padding)
                if layer.activation:
                    x = relu(x)
            else:
                x = residual_block(x, w[f"{layer.name}a.weight"], w[f"{layer.name}a.bias"],
                                   w[f"{layer.name}b.weight"], w[f"{layer.name}b.bias"])
            if not np.all(np.isfinite(x)):
                raise FloatingPointError(f"non-finite activations after layer {layer.name!r}")
        heads = {}
        for head in self.spec.heads:
            out = conv2d(x, w[f"head_{head}.weight"], w[f"head_{head}.bias"],
                         stride=1, padding=self.spec.head_kernel // 2)
            if not np.all(np.isfinite(out)):
                raise FloatingPointError(f"non-finite activations in head {head!r}")
            heads[head] = out[0].astype(float)
        return GraspMap(
            q_img=np.clip(heads["quality"], 0.0, 1.0),
            cos2phi_img=heads["cos2phi"],
            sin2phi_img=heads["sin2phi"],
            width_img=np.clip(heads["width"], 0.0, 1.0),
        )


class HeuristicPredictor:
    """Non-learned baseline so the pipeline runs without trained weights.

    Quality favors pixels that are raised above the scene's median depth
    and locally flat (inverse gradient magnitude). The grasp axis follows
    the dominant depth-variation direction from a smoothed structure
    tensor, i.e. it runs across the nearest object edge. On foreground
    pixels the opening width tracks the distance to the background (an
    object-extent proxy); elsewhere it falls back to a fixed fraction of
    the width scale.
    """

    input_size = None        # accepts any input size

    def __init__(self, smooth_sigma: float = 2.0, orient_sigma: float = 8.0,
                 width_fraction: float = 0.4, jaw_margin: float = 3.0):
        self.smooth_sigma = smooth_sigma
        self.orient_sigma = orient_sigma
        self.width_fraction = width_fraction
        self.jaw_margin = jaw_margin

    def predict(self, x: np.ndarray) -> GraspMap:
        x = np.asarray(x, dtype=float)
        if x.ndim == 3:
            x = x[0]
        d = ndimage.gaussian_filter(x, self.smooth_sigma)
        gv, gu = np.gradient(d)
        grad_mag = np.hypot(gu, gv)

        # smoothing the elevation pulls the quality peak toward the middle
        # of each raised object instead of anywhere on its flat top
        elevation = np.clip(np.median(d) - d, 0.0, None)
        elevation = ndimage.gaussian_filter(elevation, self.orient_sigma)
        if elevation.max() > 0:
            elevation = elevation / elevation.max()
        gn = grad_mag / (grad_mag.max() + 1e-12)
        flatness = 1.0 / (1.0 + (4.0 * gn) ** 2)
        q = elevation * flatness
        if q.max() > 0:
            q = q / q.max()

        # structure tensor orientation: dominant gradient direction in a
        # neighborhood; double-angle form matches the map encoding
        guu = ndimage.gaussian_filter(gu * gu, self.orient_sigma)
        gvv = ndimage.gaussian_filter(gv * gv, self.orient_sigma)
        guv = ndimage.gaussian_filter(gu * gv, self.orient_sigma)
        two_theta_sin = 2.0 * guv
        two_theta_cos = guu - gvv
        norm = np.hypot(two_theta_cos, two_theta_sin)
        ok = norm > 1e-12
        cos2 = np.where(ok, two_theta_cos / np.where(ok, norm, 1.0), 1.0)
        sin2 = np.where(ok, two_theta_sin / np.where(ok, norm, 1.0), 0.0)

        # opening width from the object extent: twice the distance to the
        # background plus a jaw margin scaled with that extent
        raised = np.clip(np.median(x) - x, 0.0, None)
        width = np.full_like(q, self.width_fraction)
        if raised.max() > 0:
            fg = raised > 0.25 * raised.max()
            if fg.any():
                dist = ndimage.distance_transform_edt(fg)
                opening = (2.0 * dist + self.jaw_margin) * 1.3
                width = np.where(fg, np.clip(opening / WIDTH_SCALE_PX, 0.02, 1.0),
                                 width)
        return GraspMap(q_img=q, cos2phi_img=cos2, sin2phi_img=sin2, width_img=width)


def build_network(spec: NetworkSpec, weights: WeightBundle) -> NetworkPredictor:
    """Validate the weight bundle against the spec and build a predictor;
    shape problems are reported eagerly with the offending layer name."""
    return NetworkPredictor(spec, weights)


def heuristic_predictor(**kwargs) -> HeuristicPredictor:
    return HeuristicPredictor(**kwargs)
