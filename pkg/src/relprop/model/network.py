"""Network container, forward evaluation with tracing, randomization."""

from dataclasses import dataclass, field

import numpy as np

from .. import backend, rng
from ..errors import ContractViolationError, TensorShapeError, UnknownLayerError
from .layers import Conv2D, Dense, Flatten, GlobalAvgPool, MaxPool2D, Residual, ReLU, output_shape, parameter_shapes


def _quantize(arr: np.ndarray) -> np.ndarray:
    # Parameters live on the float32 grid so bundle round-trips are bit-exact;
    # arithmetic stays double precision.
    return np.asarray(arr, dtype="<f4").astype(np.float64)


def _flatten_layers(layers):
    for layer in layers:
        yield layer
        if isinstance(layer, Residual):
            yield from _flatten_layers(layer.body)


class Network:
    """Immutable ordered layer graph with a named parameter store.

    The output layer is the logit layer; there is no softmax.  Imported
    models must pre-fold any affine normalization (batch norm) into the
    adjacent linear weights before export.
    """

    def __init__(self, layers, input_shape, params, input_range=(0.0, 1.0), patterns=None):
        self.layers = tuple(layers)
        self.input_shape = tuple(input_shape)
        self.params = {k: _quantize(v) for k, v in params.items()}
        self.input_range = (float(input_range[0]), float(input_range[1]))
        self.patterns = patterns
        self._validate()

    def _validate(self):
        names = [l.name for l in _flatten_layers(self.layers)]
        if len(names) != len(set(names)):
            raise ContractViolationError("layer names must be unique")
        shape = self.input_shape
        for layer in self.layers:
            shape = output_shape(layer, shape)
        self.output_shape = shape
        for layer in _flatten_layers(self.layers):
            for suffix, want in parameter_shapes(layer).items():
                key = f"{layer.name}.{suffix}"
                if suffix == "bias" and key not in self.params:
                    continue  # bias optional
                if key not in self.params:
                    raise TensorShapeError(f"{layer.name}: missing tensor {key}")
                got = self.params[key].shape
                if got != want:
                    raise TensorShapeError(f"{layer.name}: tensor {key} has shape {got}, expected {want}")

    def layer_map(self) -> dict:
        return {l.name: l for l in _flatten_layers(self.layers)}

    def parameterized_layer_names(self) -> list:
        """Names of layers with weights, in execution order (bodies included)."""
        return [l.name for l in _flatten_layers(self.layers) if parameter_shapes(l)]

    def weight(self, name: str) -> np.ndarray:
        return self.params[f"{name}.weight"]

    def bias(self, name: str):
        return self.params.get(f"{name}.bias")

    def n_logits(self) -> int:
        if len(self.output_shape) != 1:
            raise ContractViolationError("network output is not a logit vector")
        return self.output_shape[0]


@dataclass
class LayerRecord:
    """One traced layer: its input, output, and rule-relevant extras."""

    input: np.ndarray
    output: np.ndarray
    mask: np.ndarray | None = None  # relu: 1 exactly where pre-activation > 0
    argmax: np.ndarray | None = None  # maxpool winner index per window
    body_trace: "ActivationTrace | None" = None  # residual body


@dataclass
class ActivationTrace:
    x: np.ndarray
    records: dict = field(default_factory=dict)  # name -> LayerRecord, execution order
    logits: np.ndarray | None = None


def _layer_forward(layer, x, net, trace):
    if isinstance(layer, Dense):
        out = net.weight(layer.name) @ x
        b = net.bias(layer.name)
        if b is not None:
            out = out + b
        return out, LayerRecord(x, out)
    if isinstance(layer, Conv2D):
        out = backend.conv2d(x, net.weight(layer.name), layer.stride, layer.padding)
        b = net.bias(layer.name)
        if b is not None:
            out = out + b
        return out, LayerRecord(x, out)
    if isinstance(layer, ReLU):
        mask = (x > 0).astype(np.float64)
        out = x * mask
        return out, LayerRecord(x, out, mask=mask)
    if isinstance(layer, MaxPool2D):
        out, idx = backend.maxpool(x, layer.pool)
        return out, LayerRecord(x, out, argmax=idx)
    if isinstance(layer, Flatten):
        out = x.reshape(-1)
        return out, LayerRecord(x, out)
    if isinstance(layer, GlobalAvgPool):
        out = x.mean(axis=(0, 1))
        return out, LayerRecord(x, out)
    if isinstance(layer, Residual):
        body_trace = ActivationTrace(x=x)
        h = x
        for sub in layer.body:
            h, rec = _layer_forward(sub, h, net, body_trace)
            body_trace.records[sub.name] = rec
        body_trace.logits = h
        out = x + h
        return out, LayerRecord(x, out, body_trace=body_trace)
    raise ContractViolationError(f"unknown layer type {type(layer).__name__}")


def forward(net: Network, x: np.ndarray) -> ActivationTrace:
    """Evaluate the network, recording every layer's input/output and the
    ReLU masks and max-pool argmax indices the backward rules need."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != net.input_shape:
        raise ContractViolationError(f"input shape {x.shape} != declared {net.input_shape}")
    trace = ActivationTrace(x=x)
    h = x
    for layer in net.layers:
        h, rec = _layer_forward(layer, h, net, trace)
        trace.records[layer.name] = rec
    trace.logits = h
    return trace


def randomize_parameters(net: Network, layer_names, seed: int) -> Network:
    """Fresh network with the named layers' tensors redrawn i.i.d. normal.

    Each redrawn tensor keeps the empirical standard deviation of the tensor
    it replaces (zero-variance tensors stay identical); all other tensors are
    bit-identical.  Deterministic given the seed, independent of the order in
    which names are listed.
    """
    known = set(net.parameterized_layer_names())
    for name in layer_names:
        if name not in known:
            raise UnknownLayerError(name)
    params = dict(net.params)
    ordered = net.parameterized_layer_names()
    for layer_index, name in enumerate(ordered):
        if name not in layer_names:
            continue
        for slot, suffix in enumerate(("weight", "bias")):
            key = f"{name}.{suffix}"
            if key not in params:
                continue
            old = params[key]
            std = float(old.std())
            draw = rng.normal(seed, rng.RANDOMIZE, layer_index, slot, old.shape)
            params[key] = _quantize(draw * std)
    return Network(net.layers, net.input_shape, params, net.input_range, net.patterns)


def cascading_schedule(net: Network) -> list:
    """Cumulative last-to-first randomization sets: element k holds the last
    k parameterized layers."""
    names = net.parameterized_layer_names()
    return [set(names[len(names) - k :]) for k in range(1, len(names) + 1)]
