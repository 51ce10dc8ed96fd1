"""Layer specifications and static shape inference.

Conventions: activations are channels-last ``(h, w, c)`` for spatial layers
and flat ``(n,)`` vectors for dense layers; conv weights are
``(kh, kw, c_in, c_out)``, dense weights ``(out, in)``.
"""

from dataclasses import dataclass, field

from ..errors import ContractViolationError


@dataclass(frozen=True)
class Dense:
    name: str
    in_size: int
    out_size: int
    kind = "dense"


@dataclass(frozen=True)
class Conv2D:
    name: str
    in_channels: int
    out_channels: int
    kernel: tuple = (3, 3)
    stride: tuple = (1, 1)
    padding: str = "same"
    kind = "conv2d"


@dataclass(frozen=True)
class ReLU:
    name: str
    kind = "relu"


@dataclass(frozen=True)
class MaxPool2D:
    name: str
    pool: tuple = (2, 2)
    kind = "maxpool2d"


@dataclass(frozen=True)
class Flatten:
    name: str
    kind = "flatten"


@dataclass(frozen=True)
class GlobalAvgPool:
    name: str
    kind = "global_avg_pool"


@dataclass(frozen=True)
class Residual:
    """Skip connection around a nested body: out = in + body(in)."""

    name: str
    body: tuple = field(default_factory=tuple)
    kind = "residual"


def output_shape(layer, in_shape: tuple) -> tuple:
    """Shape of the layer output for a given input shape; validates both."""
    if isinstance(layer, Dense):
        if in_shape != (layer.in_size,):
            raise ContractViolationError(f"{layer.name}: expects ({layer.in_size},), got {in_shape}")
        return (layer.out_size,)
    if isinstance(layer, Conv2D):
        if len(in_shape) != 3 or in_shape[2] != layer.in_channels:
            raise ContractViolationError(f"{layer.name}: expects (h, w, {layer.in_channels}), got {in_shape}")
        from ..backend import conv_output_geometry

        oh, ow, _, _ = conv_output_geometry(in_shape, layer.kernel, layer.stride, layer.padding)
        return (oh, ow, layer.out_channels)
    if isinstance(layer, (ReLU,)):
        return in_shape
    if isinstance(layer, MaxPool2D):
        if len(in_shape) != 3:
            raise ContractViolationError(f"{layer.name}: max pooling needs (h, w, c), got {in_shape}")
        oh, ow = in_shape[0] // layer.pool[0], in_shape[1] // layer.pool[1]
        if oh < 1 or ow < 1:
            raise ContractViolationError(f"{layer.name}: pool {layer.pool} exceeds input {in_shape}")
        return (oh, ow, in_shape[2])
    if isinstance(layer, Flatten):
        n = 1
        for d in in_shape:
            n *= d
        return (n,)
    if isinstance(layer, GlobalAvgPool):
        if len(in_shape) != 3:
            raise ContractViolationError(f"{layer.name}: global pooling needs (h, w, c), got {in_shape}")
        return (in_shape[2],)
    if isinstance(layer, Residual):
        shape = in_shape
        for sub in layer.body:
            shape = output_shape(sub, shape)
        if shape != in_shape:
            raise ContractViolationError(
                f"{layer.name}: residual body maps {in_shape} to {shape}; shapes must match"
            )
        return in_shape
    raise ContractViolationError(f"unknown layer type {type(layer).__name__}")


def parameter_shapes(layer) -> dict:
    """Required parameter tensor shapes, keyed by tensor suffix."""
    if isinstance(layer, Dense):
        return {"weight": (layer.out_size, layer.in_size), "bias": (layer.out_size,)}
    if isinstance(layer, Conv2D):
        kh, kw = layer.kernel
        return {
            "weight": (kh, kw, layer.in_channels, layer.out_channels),
            "bias": (layer.out_channels,),
        }
    return {}
