"""Convolution-to-matrix lowering.

Produces the explicit matrix of the linear part of a conv layer, so products
of backward matrices can be studied directly.  Intended for small spatial
sizes; the engine itself never materializes these.
"""

import numpy as np

from ..backend import conv_output_geometry
from ..errors import ContractViolationError
from .layers import Conv2D


def flat_index(shape, y: int, x: int, c: int) -> int:
    """Row-major index of (y, x, c) in a channels-last tensor."""
    return (y * shape[1] + x) * shape[2] + c


def conv_as_matrix(layer: Conv2D, input_shape, weight: np.ndarray) -> np.ndarray:
    """Matrix M with M @ flatten(x) == conv2d(x, weight) flattened (bias excluded)."""
    if not isinstance(layer, Conv2D):
        raise ContractViolationError("conv_as_matrix needs a conv2d layer")
    kh, kw = layer.kernel
    sy, sx = layer.stride
    oh, ow, pt, pl = conv_output_geometry(input_shape, layer.kernel, layer.stride, layer.padding)
    out_shape = (oh, ow, layer.out_channels)
    n_out = oh * ow * layer.out_channels
    n_in = input_shape[0] * input_shape[1] * input_shape[2]
    mat = np.zeros((n_out, n_in))
    for oy in range(oh):
        for ox in range(ow):
            for ky in range(kh):
                y = oy * sy - pt + ky
                if y < 0 or y >= input_shape[0]:
                    continue
                for kx in range(kw):
                    x = ox * sx - pl + kx
                    if x < 0 or x >= input_shape[1]:
                        continue
                    for ci in range(layer.in_channels):
                        col = flat_index(input_shape, y, x, ci)
                        for co in range(layer.out_channels):
                            row = flat_index(out_shape, oy, ox, co)
                            mat[row, col] += weight[ky, kx, ci, co]
    return mat
