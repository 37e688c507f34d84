"""Model specs: composing layer kernels into a full CNN classifier.

A ModelSpec is an ordered list of LayerSpecs validated for shape
compatibility at build time.  Parameters live outside the spec in a flat
dict mapping "layername/w" / "layername/b" to arrays, so the optimizer can
treat them uniformly.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BuildError, DimensionError, InputError
from . import layers

LAYER_KINDS = ("conv2d", "maxpool2d", "relu", "flatten", "dense")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    kernel: tuple = ()  # (kh, kw) for conv2d
    out_channels: int = 0  # conv2d
    stride: int = 1  # conv2d
    units: int = 0  # dense

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise InputError(f"unknown layer kind {self.kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple  # (H, W, C)
    layers: tuple  # LayerSpec sequence
    n_classes: int

    def __post_init__(self):
        shapes = infer_shapes(self)
        if shapes[-1] != (self.n_classes,):
            raise BuildError(
                f"final layer produces {shapes[-1]}, expected ({self.n_classes},)"
            )


def conv(kh, kw, out_channels, stride=1):
    return LayerSpec("conv2d", kernel=(kh, kw), out_channels=out_channels, stride=stride)


def pool():
    return LayerSpec("maxpool2d")


def relu():
    return LayerSpec("relu")


def flat():
    return LayerSpec("flatten")


def dense(units):
    return LayerSpec("dense", units=units)


def infer_shapes(model):
    """Per-layer output shapes (excluding the batch axis), validated."""
    shapes = []
    cur = tuple(model.input_shape)
    if len(cur) != 3 or min(cur) < 1:
        raise BuildError(f"input shape must be positive [H,W,C], got {cur}")
    for li, layer in enumerate(model.layers):
        name = f"layer {li} ({layer.kind})"
        if layer.kind == "conv2d":
            if len(cur) != 3:
                raise BuildError(f"{name}: expects [H,W,C] input, got {cur}")
            h, w, _ = cur
            kh, kw = layer.kernel
            oh = (h - kh) // layer.stride + 1
            ow = (w - kw) // layer.stride + 1
            if h < kh or w < kw or oh < 1 or ow < 1:
                raise BuildError(f"{name}: kernel {layer.kernel} does not fit input {h}x{w}")
            cur = (oh, ow, layer.out_channels)
        elif layer.kind == "maxpool2d":
            if len(cur) != 3:
                raise BuildError(f"{name}: expects [H,W,C] input, got {cur}")
            h, w, c = cur
            if h < 2 or w < 2:
                raise BuildError(f"{name}: 2x2 window does not fit input {h}x{w}")
            cur = (h // 2, w // 2, c)
        elif layer.kind == "relu":
            pass
        elif layer.kind == "flatten":
            cur = (int(np.prod(cur)),)
        elif layer.kind == "dense":
            if len(cur) != 1:
                raise BuildError(f"{name}: expects flat input, got {cur}")
            cur = (layer.units,)
        shapes.append(cur)
    return shapes


def layer_names(model):
    """Keras-style running names: conv2d, conv2d_1, ..., dense, dense_1, ..."""
    base = {"conv2d": "conv2d", "maxpool2d": "max_pooling2d", "relu": "relu",
            "flatten": "flatten", "dense": "dense"}
    counts = {}
    names = []
    for layer in model.layers:
        b = base[layer.kind]
        n = counts.get(b, 0)
        counts[b] = n + 1
        names.append(b if n == 0 else f"{b}_{n}")
    return names


def build_paper_cnn(n_classes=10):
    """The reference architecture: 224x224x3 in, four conv/pool blocks
    (32, 64, 128, 128 filters of 3x3), dense 512, dense n_classes.
    Total parameter count for n_classes=10 is 9,683,658."""
    if n_classes < 2:
        raise InputError("n_classes must be >= 2")
    return ModelSpec(
        input_shape=(224, 224, 3),
        layers=(
            conv(3, 3, 32), relu(), pool(),
            conv(3, 3, 64), relu(), pool(),
            conv(3, 3, 128), relu(), pool(),
            conv(3, 3, 128), relu(), pool(),
            flat(),
            dense(512), relu(),
            dense(n_classes),
        ),
        n_classes=n_classes,
    )


def build_scaled_cnn(input_shape, widths, n_classes, dense_units=64):
    """Same layer pattern as build_paper_cnn with configurable conv widths."""
    if n_classes < 2:
        raise InputError("n_classes must be >= 2")
    if not widths:
        raise InputError("widths must be non-empty")
    seq = []
    for w in widths:
        seq += [conv(3, 3, w), relu(), pool()]
    seq += [flat(), dense(dense_units), relu(), dense(n_classes)]
    return ModelSpec(input_shape=tuple(input_shape), layers=tuple(seq), n_classes=n_classes)


def _param_shapes(model):
    """name -> (w_shape, b_shape) for every parameterized layer."""
    out = {}
    cur = tuple(model.input_shape)
    shapes = infer_shapes(model)
    names = layer_names(model)
    for layer, name, shape in zip(model.layers, names, shapes):
        if layer.kind == "conv2d":
            kh, kw = layer.kernel
            out[name] = ((kh, kw, cur[2], layer.out_channels), (layer.out_channels,))
        elif layer.kind == "dense":
            out[name] = ((cur[0], layer.units), (layer.units,))
        cur = shape
    return out


def count_params(model):
    total = 0
    for wsh, bsh in _param_shapes(model).values():
        total += int(np.prod(wsh)) + int(np.prod(bsh))
    return total


def init_params(model, seed, dtype=np.float32):
    """Uniform(+-sqrt(6/fan_in)) weights, zero biases, deterministic per seed.

    The final classifier layer starts at zero so initial class probabilities
    are exactly uniform (loss ln C) regardless of the activation scale the
    stack produces.
    """
    rng = np.random.default_rng(seed)
    params = {}
    names = list(_param_shapes(model).items())
    for i, (name, (wsh, bsh)) in enumerate(names):
        if i == len(names) - 1:
            params[f"{name}/w"] = np.zeros(wsh, dtype=dtype)
        else:
            fan_in = int(np.prod(wsh[:-1]))
            limit = np.sqrt(6.0 / fan_in)
            params[f"{name}/w"] = rng.uniform(-limit, limit, size=wsh).astype(dtype)
        params[f"{name}/b"] = np.zeros(bsh, dtype=dtype)
    return params


def forward_batch(model, params, batch):
    """Logits [B, n_classes] for batch [B,H,W,C]."""
    return _forward(model, params, batch, want_vjp=False)


def forward_vjp(model, params, batch):
    """(logits, backward) where backward(upstream [B,n_classes]) -> grad dict
    with the same keys as params, summed over the batch."""
    return _forward(model, params, batch, want_vjp=True)


def _forward(model, params, batch, want_vjp):
    if batch.ndim != 4 or tuple(batch.shape[1:]) != tuple(model.input_shape):
        raise DimensionError(
            f"batch shape {batch.shape} does not match model input {model.input_shape}"
        )
    names = layer_names(model)
    x = batch
    tape = []
    for layer, name in zip(model.layers, names):
        if layer.kind == "conv2d":
            ks = layers.ConvKernelSet(params[f"{name}/w"], params[f"{name}/b"])
            if want_vjp:
                x, bwd = layers.conv2d_vjp(x, ks, layer.stride)
                tape.append(("conv2d", name, bwd))
            else:
                x = layers.conv2d_forward(x, ks, layer.stride)
        elif layer.kind == "maxpool2d":
            if want_vjp:
                x, bwd = layers.maxpool2d_vjp(x)
                tape.append(("maxpool2d", name, bwd))
            else:
                x = layers.maxpool2d_forward(x)
        elif layer.kind == "relu":
            if want_vjp:
                x, bwd = layers.relu_vjp(x)
                tape.append(("relu", name, bwd))
            else:
                x = layers.relu(x)
        elif layer.kind == "flatten":
            if want_vjp:
                x, bwd = layers.flatten_vjp(x)
                tape.append(("flatten", name, bwd))
            else:
                x = layers.flatten(x)
        elif layer.kind == "dense":
            w, b = params[f"{name}/w"], params[f"{name}/b"]
            if want_vjp:
                x, bwd = layers.dense_vjp(x, w, b)
                tape.append(("dense", name, bwd))
            else:
                x = layers.dense_forward(x, w, b)
    if not want_vjp:
        return x

    logits = x

    def backward(upstream):
        if upstream.shape != logits.shape:
            raise DimensionError(
                f"upstream shape {upstream.shape} does not match logits {logits.shape}"
            )
        grads = {}
        g = upstream
        for kind, name, bwd in reversed(tape):
            if kind == "conv2d":
                g, dw, db = bwd(g)
                grads[f"{name}/w"] = dw
                grads[f"{name}/b"] = db
            elif kind == "dense":
                g, dw, db = bwd(g)
                grads[f"{name}/w"] = dw
                grads[f"{name}/b"] = db
            else:
                g = bwd(g)
        return grads

    return logits, backward


def backward_batch(model, params, batch, upstream):
    _, bwd = forward_vjp(model, params, batch)
    return bwd(upstream)


def shape_trace(model):
    """Output shapes per summary row (activation layers folded into the
    preceding parameterized layer, as a framework summary prints them)."""
    return [shape for _, shape, _ in summary_rows(model)]


def summary_rows(model):
    """(display name, output shape, param count) per row; relu rows are folded
    into the preceding layer so the table mirrors a framework model summary."""
    names = layer_names(model)
    shapes = infer_shapes(model)
    pshapes = _param_shapes(model)
    rows = []
    for layer, name, shape in zip(model.layers, names, shapes):
        if layer.kind == "relu":
            continue
        if name in pshapes:
            wsh, bsh = pshapes[name]
            count = int(np.prod(wsh)) + int(np.prod(bsh))
        else:
            count = 0
        rows.append((name, shape, count))
    return rows


_KIND_LABEL = {"conv2d": "Conv2D", "max_pooling2d": "MaxPooling2D",
               "flatten": "Flatten", "dense": "Dense"}


def summary(model):
    """Three-column textual model summary: layer, output shape, param count."""
    lines = []
    header = f"{'Layer (type)':<30}{'Output Shape':<22}{'Param #':>10}"
    lines.append(header)
    lines.append("=" * len(header))
    for name, shape, count in summary_rows(model):
        base = name.rsplit("_", 1)[0] if name[-1].isdigit() else name
        label = _KIND_LABEL.get(base, base)
        shape_s = "(None, " + ", ".join(str(s) for s in shape) + ")"
        lines.append(f"{name + ' (' + label + ')':<30}{shape_s:<22}{count:>10}")
    lines.append("=" * len(header))
    lines.append(f"Total params: {count_params(model):,}")
    return "\n".join(lines)
