"""Signal-pattern estimation for PatternNet / PatternAttribution.

For every linear layer the pattern of neuron i is
``a_i = cov[h] w_i / (w_i^T cov[h] w_i)`` where ``h`` is the layer input; the
two-component estimator restricts the expectations per neuron to the samples
with positive (respectively non-positive) pre-activation.  ``w_i^T a_i = 1``
holds for every neuron with non-degenerate covariance by construction.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolationError
from ..model.layers import Conv2D, Dense
from ..model.network import _flatten_layers, forward

_DEGENERATE_TOL = 1e-12


@dataclass
class PatternSet:
    patterns: dict = field(default_factory=dict)  # layer -> A, same shape as W
    patterns_pos: dict = field(default_factory=dict)
    patterns_neg: dict = field(default_factory=dict)
    degenerate: dict = field(default_factory=dict)  # layer -> bool per output neuron

    def as_tensors(self) -> dict:
        out = {}
        for name, a in self.patterns.items():
            out[f"{name}.pattern"] = a
        for name, a in self.patterns_pos.items():
            out[f"{name}.pattern_pos"] = a
        for name, a in self.patterns_neg.items():
            out[f"{name}.pattern_neg"] = a
        return out

    @classmethod
    def from_tensors(cls, tensors: dict) -> "PatternSet":
        ps = cls()
        for key, arr in tensors.items():
            if key.endswith(".pattern"):
                ps.patterns[key[: -len(".pattern")]] = arr
            elif key.endswith(".pattern_pos"):
                ps.patterns_pos[key[: -len(".pattern_pos")]] = arr
            elif key.endswith(".pattern_neg"):
                ps.patterns_neg[key[: -len(".pattern_neg")]] = arr
        return ps


def _patch_matrix(x, layer):
    """Layer input as a (samples, features) design matrix."""
    if isinstance(layer, Dense):
        return x.reshape(1, -1)
    from ..backend import conv_output_geometry

    kh, kw = layer.kernel
    sy, sx = layer.stride
    oh, ow, pt, pl = conv_output_geometry(x.shape, layer.kernel, layer.stride, layer.padding)
    pb = max(0, (oh - 1) * sy + kh - (x.shape[0] + pt))
    pr = max(0, (ow - 1) * sx + kw - (x.shape[1] + pl))
    xp = np.pad(x, ((pt, pb), (pl, pr), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(0, 1))
    win = win[::sy, ::sx][:oh, :ow]  # (oh, ow, ci, kh, kw)
    patches = win.transpose(0, 1, 3, 4, 2).reshape(oh * ow, kh * kw * x.shape[2])
    return patches


def _weight_matrix(net, layer):
    w = net.weight(layer.name)
    if isinstance(layer, Dense):
        return w  # (out, in)
    kh, kw, ci, co = w.shape
    return w.reshape(kh * kw * ci, co).T  # (out, features)


class _Accumulator:
    def __init__(self, d, m):
        self.n = 0
        self.sum_x = np.zeros(d)
        self.sum_y = np.zeros(m)
        self.sum_xy = np.zeros((d, m))
        self.n_pos = np.zeros(m)
        self.sum_y_pos = np.zeros(m)
        self.sum_x_pos = np.zeros((d, m))
        self.sum_xy_pos = np.zeros((d, m))

    def add(self, x_mat, y_mat):
        self.n += x_mat.shape[0]
        self.sum_x += x_mat.sum(axis=0)
        self.sum_y += y_mat.sum(axis=0)
        self.sum_xy += x_mat.T @ y_mat
        pos = y_mat > 0
        self.n_pos += pos.sum(axis=0)
        y_pos = np.where(pos, y_mat, 0.0)
        self.sum_y_pos += y_pos.sum(axis=0)
        self.sum_x_pos += x_mat.T @ pos
        self.sum_xy_pos += x_mat.T @ y_pos


def _estimate(weight, n, sum_x, sum_y, sum_xy):
    """Pattern matrix (out, features) from moment sums; returns (A, degenerate)."""
    m = weight.shape[0]
    a = np.zeros_like(weight)
    degenerate = np.zeros(m, dtype=bool)
    with np.errstate(invalid="ignore", divide="ignore"):
        counts = np.maximum(n, 1.0)
        mean_x = sum_x / counts
        mean_y = sum_y / counts
        cov_xy = sum_xy / counts
    for i in range(m):
        ni = n[i] if np.ndim(n) else n
        if ni < 2:
            degenerate[i] = True
        else:
            mx = mean_x[:, i] if mean_x.ndim == 2 else mean_x
            my = mean_y[i]
            cov_i = cov_xy[:, i] - mx * my
            denom = float(weight[i] @ cov_i)
            if abs(denom) <= _DEGENERATE_TOL:
                degenerate[i] = True
            else:
                a[i] = cov_i / denom
        if degenerate[i]:
            norm2 = float(weight[i] @ weight[i])
            a[i] = weight[i] / norm2 if norm2 > 0 else 0.0
    return a, degenerate


def fit_patterns(net, data) -> PatternSet:
    """Fit the linear and two-component pattern estimators on traced inputs.

    ``data`` is a sequence of network inputs; every linear layer needs at
    least two samples.  Neurons whose covariance quadratic form falls below
    tolerance get the fallback pattern w/|w|^2 and a degenerate flag.
    """
    data = list(data)
    if len(data) < 2:
        raise ContractViolationError("pattern fitting needs at least 2 data points")
    linear_layers = [l for l in _flatten_layers(net.layers) if isinstance(l, (Dense, Conv2D))]
    accs = {}
    for x in data:
        trace = forward(net, np.asarray(x, dtype=np.float64))
        records = _collect_records(trace)
        for layer in linear_layers:
            weight = _weight_matrix(net, layer)
            x_mat = _patch_matrix(records[layer.name].input, layer)
            bias = net.bias(layer.name)
            y_mat = x_mat @ weight.T
            if bias is not None:
                y_mat = y_mat + bias
            acc = accs.setdefault(layer.name, _Accumulator(x_mat.shape[1], weight.shape[0]))
            acc.add(x_mat, y_mat)

    ps = PatternSet()
    for layer in linear_layers:
        acc = accs[layer.name]
        weight = _weight_matrix(net, layer)
        a, deg = _estimate(weight, acc.n, acc.sum_x, acc.sum_y, acc.sum_xy)
        a_pos, deg_pos = _estimate(weight, acc.n_pos, acc.sum_x_pos, acc.sum_y_pos, acc.sum_xy_pos)
        a_neg, deg_neg = _estimate(
            weight,
            acc.n - acc.n_pos,
            acc.sum_x[:, None] - acc.sum_x_pos,
            acc.sum_y - acc.sum_y_pos,
            acc.sum_xy - acc.sum_xy_pos,
        )
        shape = net.weight(layer.name).shape
        ps.patterns[layer.name] = _to_weight_layout(a, shape, layer)
        ps.patterns_pos[layer.name] = _to_weight_layout(a_pos, shape, layer)
        ps.patterns_neg[layer.name] = _to_weight_layout(a_neg, shape, layer)
        ps.degenerate[layer.name] = deg | deg_pos | deg_neg
    return ps


def _collect_records(trace):
    records = dict(trace.records)
    for rec in list(trace.records.values()):
        if rec.body_trace is not None:
            records.update(rec.body_trace.records)
    return records


def _to_weight_layout(a, shape, layer):
    if isinstance(layer, Dense):
        return a
    return a.T.reshape(shape)
