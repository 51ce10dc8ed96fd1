"""Kernel backend selection.

The compiled Cython kernels are used when the extension built; otherwise the
numpy fallback takes over.  ``RELPROP_BACKEND=python`` forces the fallback,
``RELPROP_BACKEND=cython`` makes a missing extension an error.  Both
implementations share the padding arithmetic below and agree within float
round-off (covered by the parity tests and the benchmark).
"""

import os

import numpy as np

from ..errors import ContractViolationError
from . import pykernels as _py

_requested = os.environ.get("RELPROP_BACKEND", "auto")
if _requested not in ("auto", "cython", "python"):
    raise ContractViolationError(f"RELPROP_BACKEND must be auto|cython|python, got {_requested!r}")

_impl = _py
BACKEND = "python"
if _requested in ("auto", "cython"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise


def conv_output_geometry(in_shape, kernel, stride, padding):
    """Resolve (oh, ow, pad_top, pad_left) for same/valid padding.

    "same" zero-pads to output size ceil(in/stride) with the extra padding on
    the bottom/right; "valid" uses no padding and floor division.
    """
    h, w = in_shape[0], in_shape[1]
    kh, kw = kernel
    sy, sx = stride
    if padding == "same":
        oh = -(-h // sy)
        ow = -(-w // sx)
        pad_h = max(0, (oh - 1) * sy + kh - h)
        pad_w = max(0, (ow - 1) * sx + kw - w)
        return oh, ow, pad_h // 2, pad_w // 2
    if padding == "valid":
        if h < kh or w < kw:
            raise ContractViolationError(f"kernel {kernel} exceeds input {in_shape}")
        return (h - kh) // sy + 1, (w - kw) // sx + 1, 0, 0
    raise ContractViolationError(f"padding must be 'same' or 'valid', got {padding!r}")


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv2d(x, w, stride, padding):
    """Channels-last convolution, bias excluded: (h,w,ci) x (kh,kw,ci,co)."""
    oh, ow, pt, pl = conv_output_geometry(x.shape, w.shape[:2], stride, padding)
    return _impl.conv2d_forward(_c(x), _c(w), stride[0], stride[1], pt, pl, oh, ow)


def conv2d_adjoint(g, w, stride, padding, in_shape):
    """Adjoint of ``conv2d`` in its input: maps output-space to input-space."""
    oh, ow, pt, pl = conv_output_geometry(in_shape, w.shape[:2], stride, padding)
    if g.shape[:2] != (oh, ow):
        raise ContractViolationError(f"adjoint input {g.shape} does not match output {(oh, ow)}")
    return _impl.conv2d_input_adjoint(_c(g), _c(w), stride[0], stride[1], pt, pl, in_shape[0], in_shape[1])


def maxpool(x, pool):
    """Max pooling with stride = pool size; returns (values, argmax indices)."""
    return _impl.maxpool_forward(_c(x), pool[0], pool[1])


def maxpool_scatter(r, idx, pool, in_shape):
    """Route relevance to the stored argmax of each pooling window."""
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    return _impl.maxpool_scatter(_c(r), idx, pool[0], pool[1], in_shape[0], in_shape[1])
