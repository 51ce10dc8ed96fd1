from .bundle import load_bundle, save_bundle
from .layers import Conv2D, Dense, Flatten, GlobalAvgPool, MaxPool2D, Residual, ReLU, output_shape
from .lowering import conv_as_matrix
from .network import ActivationTrace, Network, cascading_schedule, forward, randomize_parameters
from .presets import cifar10, mlp, preset, tiny_residual

__all__ = [
    "ActivationTrace",
    "Conv2D",
    "Dense",
    "Flatten",
    "GlobalAvgPool",
    "MaxPool2D",
    "Network",
    "Residual",
    "ReLU",
    "cascading_schedule",
    "cifar10",
    "conv_as_matrix",
    "forward",
    "load_bundle",
    "mlp",
    "output_shape",
    "preset",
    "randomize_parameters",
    "save_bundle",
    "tiny_residual",
]
