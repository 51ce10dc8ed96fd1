"""Seeded preset architectures used by the audit harnesses and tests."""

import numpy as np

from .. import rng
from ..errors import ConfigurationError
from .layers import Conv2D, Dense, Flatten, GlobalAvgPool, MaxPool2D, Residual, ReLU, parameter_shapes
from .network import Network, _flatten_layers


def _he_std(layer) -> float:
    if isinstance(layer, Dense):
        return float(np.sqrt(2.0 / layer.in_size))
    kh, kw = layer.kernel
    return float(np.sqrt(2.0 / (kh * kw * layer.in_channels)))


def _init_params(layers, seed: int) -> dict:
    params = {}
    index = 0
    for layer in _flatten_layers(layers):
        shapes = parameter_shapes(layer)
        if not shapes:
            continue
        w = rng.normal(seed, rng.PRESET, index, 0, shapes["weight"]) * _he_std(layer)
        params[f"{layer.name}.weight"] = w
        params[f"{layer.name}.bias"] = np.zeros(shapes["bias"])
        index += 1
    return params


def cifar10(seed: int) -> Network:
    """32x32x3 -> 10 logits: four same-padded 3x3 convs with two 2x2 pools,
    then two dense layers (dropout omitted; identity at inference)."""
    layers = (
        Conv2D("conv1", 3, 32),
        ReLU("relu1"),
        Conv2D("conv2", 32, 64),
        ReLU("relu2"),
        MaxPool2D("pool2"),
        Conv2D("conv3", 64, 128),
        ReLU("relu3"),
        Conv2D("conv4", 128, 128),
        ReLU("relu4"),
        MaxPool2D("pool4"),
        Flatten("flatten"),
        Dense("fc5", 8 * 8 * 128, 1024),
        ReLU("relu5"),
        Dense("fc6", 1024, 10),
    )
    return Network(layers, (32, 32, 3), _init_params(layers, seed))


def mlp(sizes, seed: int) -> Network:
    """Dense stack with ReLU between layers; sizes[0] is the input width."""
    sizes = list(sizes)
    if len(sizes) < 2:
        raise ConfigurationError("mlp needs at least [in, out] sizes")
    layers = []
    for i in range(len(sizes) - 1):
        layers.append(Dense(f"fc{i + 1}", sizes[i], sizes[i + 1]))
        if i < len(sizes) - 2:
            layers.append(ReLU(f"relu{i + 1}"))
    return Network(tuple(layers), (sizes[0],), _init_params(layers, seed))


def tiny_residual(seed: int) -> Network:
    """Small conv net with one residual block and global average pooling."""
    layers = (
        Conv2D("conv1", 3, 8),
        ReLU("relu1"),
        Residual(
            "res2",
            (
                Conv2D("res2_conv_a", 8, 8),
                ReLU("res2_relu"),
                Conv2D("res2_conv_b", 8, 8),
            ),
        ),
        ReLU("relu2"),
        GlobalAvgPool("gap"),
        Dense("fc3", 8, 4),
    )
    return Network(layers, (6, 6, 3), _init_params(layers, seed))


def preset(arch: str, seed: int, sizes=None) -> Network:
    """Build a preset by name: cifar10 | mlp (with sizes) | tiny_residual."""
    if arch == "cifar10":
        return cifar10(seed)
    if arch == "mlp":
        if not sizes:
            raise ConfigurationError("mlp preset needs layer sizes")
        return mlp(sizes, seed)
    if arch == "tiny_residual":
        return tiny_residual(seed)
    raise ConfigurationError(f"unknown preset {arch!r} (cifar10, mlp, tiny_residual)")
