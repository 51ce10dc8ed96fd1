"""The relevance-propagation engine: one backward pass per rule.

``attribute`` produces a full per-layer relevance trace for any rule, with
either a logit target or an arbitrary relevance vector injected at a named
layer (the audit harnesses inject standard-normal vectors).  Propagation is
pure: identical inputs give bit-identical traces.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import backend
from ..errors import ConfigurationError, ContractViolationError, UnknownLayerError
from ..model.layers import Conv2D, Dense, Flatten, GlobalAvgPool, MaxPool2D, Residual, ReLU
from ..model.network import forward
from . import propagators as prop
from . import rules as R


@dataclass(frozen=True)
class Logit:
    """Explain logit k; top relevance follows the rule's initialization."""

    k: int


@dataclass(frozen=True)
class Inject:
    """Replace the relevance of the named layer's output with ``vector``."""

    layer: str
    vector: np.ndarray


@dataclass
class RelevanceTrace:
    rule: object
    target: object
    layers: dict = field(default_factory=dict)  # name -> relevance tensor
    input: np.ndarray | None = None
    pairs: dict = field(default_factory=dict)  # DeepLIFT (r+, r-) per layer
    reference: object = None  # DeepLIFT reference activation trace
    degenerate: bool = False

    def relevance(self, name: str) -> np.ndarray:
        if name == "input":
            return self.input
        return self.layers[name]


def deeplift_reference(x: np.ndarray, mode) -> np.ndarray:
    """Reference point: zeros, or a Gaussian blur of x for image inputs."""
    if mode == "zeros":
        return np.zeros_like(x)
    if isinstance(mode, R.Blurred):
        return _gaussian_blur(x, mode.sigma)
    raise ConfigurationError(f"unknown reference {mode!r}")


def _gaussian_blur(x, sigma):
    if sigma <= 0:
        return x.copy()
    radius = max(1, int(np.ceil(3.0 * sigma)))
    coords = np.arange(-radius, radius + 1)
    kernel = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel /= kernel.sum()
    if x.ndim == 1:
        return _blur_axis(x, kernel, 0)
    out = x
    for axis in (0, 1):  # spatial axes only; channels untouched
        out = _blur_axis(out, kernel, axis)
    return out


def _blur_axis(x, kernel, axis):
    radius = (len(kernel) - 1) // 2
    pad = [(0, 0)] * x.ndim
    pad[axis] = (radius, radius)
    xp = np.pad(x, pad, mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(xp, len(kernel), axis=axis)
    return np.tensordot(win, kernel, axes=([win.ndim - 1], [0]))


class _Walker:
    """Backward state machine shared by all rules (DeepLIFT carries a pair)."""

    def __init__(self, net, rule, trace, ref_trace):
        self.net = net
        self.rule = rule
        self.trace = trace
        self.ref = ref_trace
        flat = _flat_linear_names(net.layers)
        self.first_linear = flat[0] if flat else None
        dense_names = [l.name for l in _iter_flat(net.layers) if isinstance(l, Dense)]
        self.last_dense = dense_names[-1] if dense_names else None

    # -- per-layer rule dispatch ------------------------------------------

    def linear(self, layer, rec, ref_rec, state):
        rule = self.rule
        w = self.net.weight(layer.name)
        b = self.net.bias(layer.name)
        h = rec.input
        dense = isinstance(layer, Dense)
        geom = (layer.stride, layer.padding) if not dense else None

        if isinstance(rule, R.DeepLIFT):
            dh_in = rec.input - ref_rec.input
            p, n = state
            if dense:
                return prop.dense_deeplift(w, dh_in, p, n, rule.ablation)
            return prop.conv_deeplift(w, dh_in, p, n, *geom, rule.ablation)

        if isinstance(rule, (R.Gradient, R.GradTimesInput, R.GuidedBP, R.Deconv, R.RectGrad)):
            if dense:
                return w.T @ state
            return backend.conv2d_adjoint(state, w, *geom, h.shape)

        if isinstance(rule, R.ZPlus):
            return self._alphabeta(layer, w, b, h, state, 1.0, 0.0, geom)
        if isinstance(rule, R.AlphaBeta):
            return self._alphabeta(layer, w, b, h, state, rule.alpha, rule.beta, geom)
        if isinstance(rule, R.LRPz):
            if dense:
                return prop.dense_lrpz(w, b, h, state, rule.epsilon)
            return prop.conv_lrpz(w, b, h, state, *geom, rule.epsilon)
        if isinstance(rule, R.LRPCmp):
            if dense:
                return prop.dense_lrpz(w, b, h, state, rule.epsilon)
            return self._alphabeta(layer, w, b, h, state, rule.alpha, rule.beta, geom)
        if isinstance(rule, R.DTD):
            if layer.name == self.first_linear and rule.input_rule != "zplus":
                return self._dtd_input(layer, w, h, state, rule.input_rule, geom)
            return self._alphabeta(layer, w, b, h, state, 1.0, 0.0, geom)
        if isinstance(rule, R.ContrastiveEBP):
            if layer.name == self.last_dense:
                if not dense:
                    raise ConfigurationError("contrastive excitation BP needs a final dense layer")
                pos = prop.dense_zplus(w, b, h, state)
                neg_b = None if b is None else -b
                neg = prop.dense_zplus(-w, neg_b, h, state)
                return pos - neg
            return self._alphabeta(layer, w, b, h, state, 1.0, 0.0, geom)
        if isinstance(rule, (R.PatternNet, R.PatternAttribution)):
            patterns = self.net.patterns
            if patterns is None or layer.name not in patterns.patterns:
                raise ConfigurationError(f"{layer.name}: no fitted pattern set attached to the network")
            a = patterns.patterns[layer.name]
            mode = "net" if isinstance(rule, R.PatternNet) else "attribution"
            if dense:
                return prop.dense_pattern(w, a, state, mode)
            return prop.conv_pattern(w, a, state, *geom, h.shape, mode)
        raise ConfigurationError(f"rule {rule!r} has no linear-layer propagator")

    def _alphabeta(self, layer, w, b, h, r, alpha, beta, geom):
        if isinstance(layer, Dense):
            return prop.dense_alphabeta(w, b, h, r, alpha, beta)
        return prop.conv_alphabeta(w, b, h, r, *geom, alpha, beta)

    def _dtd_input(self, layer, w, h, r, input_rule, geom):
        if input_rule == "w2":
            if isinstance(layer, Dense):
                return prop.dense_w2(w, r)
            return prop.conv_w2(w, h.shape, r, *geom)
        lower = input_rule.lower if input_rule.lower is not None else self.net.input_range[0]
        upper = input_rule.upper if input_rule.upper is not None else self.net.input_range[1]
        if isinstance(layer, Dense):
            return prop.dense_wbox(w, h, lower, upper, r)
        return prop.conv_wbox(w, h, lower, upper, r, *geom)

    def relu(self, layer, rec, ref_rec, state):
        rule = self.rule
        if isinstance(rule, R.DeepLIFT):
            dz = rec.input - ref_rec.input
            dh = rec.output - ref_rec.output
            return prop.deeplift_rescale(rec.input, dz, dh, *state)
        if isinstance(rule, (R.Gradient, R.GradTimesInput)):
            return prop.relu_gradient(rec.mask, state)
        if isinstance(rule, R.GuidedBP):
            return prop.relu_modified(rec.mask, state, "guidedbp")
        if isinstance(rule, R.Deconv):
            return prop.relu_modified(rec.mask, state, "deconv")
        if isinstance(rule, R.RectGrad):
            return prop.relu_modified(rec.mask, state, "rectgrad", rule.q)
        # z+ family, LRP variants, DTD, patterns: relevance passes unmasked.
        return state

    def pool(self, layer, rec, ref_rec, state):
        if isinstance(self.rule, R.DeepLIFT):
            dx = rec.input - ref_rec.input
            dh = rec.output - ref_rec.output
            return prop.deeplift_pool(dx, dh, rec.argmax, layer.pool, rec.input.shape, *state)
        return backend.maxpool_scatter(state, rec.argmax, layer.pool, rec.input.shape)

    def structural(self, layer, rec, state):
        if isinstance(layer, Flatten):
            reshape = lambda r: r.reshape(rec.input.shape)
        else:  # global average pool
            reshape = lambda r: prop.gap_backward(r, rec.input.shape)
        if isinstance(self.rule, R.DeepLIFT):
            return reshape(state[0]), reshape(state[1])
        return reshape(state)

    def residual(self, layer, rec, ref_rec, state):
        rule = self.rule
        body = list(layer.body)
        body_records = rec.body_trace.records
        ref_records = ref_rec.body_trace.records if ref_rec is not None else None

        if isinstance(rule, R.DeepLIFT) or isinstance(
            rule, (R.Gradient, R.GradTimesInput, R.GuidedBP, R.Deconv, R.RectGrad)
        ):
            # Adjoint of out = in + body(in): both paths receive the state.
            body_state = state
            skip_state = state
        else:
            g = rec.body_trace.logits
            h_in = rec.input
            if isinstance(rule, (R.ZPlus, R.DTD, R.ContrastiveEBP)):
                skip_state, body_state = prop.two_branch_alphabeta(h_in, g, state, 1.0, 0.0)
            elif isinstance(rule, (R.AlphaBeta, R.LRPCmp)):
                skip_state, body_state = prop.two_branch_alphabeta(h_in, g, state, rule.alpha, rule.beta)
            elif isinstance(rule, R.LRPz):
                skip_state, body_state = prop.two_branch_signed(h_in, g, state, rule.epsilon)
            else:  # pattern rules: signed proportional split
                skip_state, body_state = prop.two_branch_signed(h_in, g, state, 1e-9)

        for sub in reversed(body):
            body_state = self.step(sub, body_records[sub.name], ref_records[sub.name] if ref_records else None, body_state)
        if isinstance(self.rule, R.DeepLIFT):
            return skip_state[0] + body_state[0], skip_state[1] + body_state[1]
        return skip_state + body_state

    def step(self, layer, rec, ref_rec, state):
        if isinstance(layer, (Dense, Conv2D)):
            return self.linear(layer, rec, ref_rec, state)
        if isinstance(layer, ReLU):
            return self.relu(layer, rec, ref_rec, state)
        if isinstance(layer, MaxPool2D):
            return self.pool(layer, rec, ref_rec, state)
        if isinstance(layer, (Flatten, GlobalAvgPool)):
            return self.structural(layer, rec, state)
        if isinstance(layer, Residual):
            return self.residual(layer, rec, ref_rec, state)
        raise ContractViolationError(f"unknown layer type {type(layer).__name__}")


def _iter_flat(layers):
    for layer in layers:
        yield layer
        if isinstance(layer, Residual):
            yield from _iter_flat(layer.body)


def _flat_linear_names(layers):
    return [l.name for l in _iter_flat(layers) if isinstance(l, (Dense, Conv2D))]


def _onehot(k, n):
    if not 0 <= k < n:
        raise ContractViolationError(f"logit index {k} outside [0, {n})")
    v = np.zeros(n)
    v[k] = 1.0
    return v


def attribute(net, x, rule, target) -> RelevanceTrace:
    """Backpropagate relevance for ``rule`` from ``target`` down to the input.

    Target is either ``Logit(k)`` or ``Inject(layer, vector)``.  The trace
    holds one relevance tensor per traversed layer plus the input relevance;
    DeepLIFT traces additionally carry the (positive, negative) pair and the
    reference activations.
    """
    if isinstance(rule, R.ContrastiveLRP):
        return _contrastive_lrp(net, x, rule, target)

    x = np.asarray(x, dtype=np.float64)
    trace = forward(net, x)
    is_deeplift = isinstance(rule, R.DeepLIFT)
    ref_trace = forward(net, deeplift_reference(x, rule.reference)) if is_deeplift else None
    if isinstance(rule, R.ContrastiveEBP) and not any(isinstance(l, Dense) for l in _iter_flat(net.layers)):
        raise ConfigurationError("contrastive excitation BP needs a dense layer to rewrite")

    names = [l.name for l in net.layers]
    if isinstance(target, Inject):
        if target.layer not in names:
            raise UnknownLayerError(target.layer)
        start = names.index(target.layer)
        v = np.asarray(target.vector, dtype=np.float64)
        want = trace.records[target.layer].output.shape
        if v.shape != want:
            raise ContractViolationError(f"injected vector shape {v.shape} != layer output {want}")
        state = (np.maximum(v, 0.0), np.minimum(v, 0.0)) if is_deeplift else v
        top_value = v
    elif isinstance(target, Logit):
        start = len(names) - 1
        n = net.n_logits()
        onehot = _onehot(target.k, n)
        if is_deeplift:
            # Multiplier chain starts at 1 on the explained logit, riding the
            # slot of its delta sign; the recorded relevance is the logit
            # difference itself.
            delta = float(trace.logits[target.k] - ref_trace.logits[target.k])
            state = (onehot, np.zeros_like(onehot)) if delta >= 0 else (np.zeros_like(onehot), onehot)
            top_value = delta * onehot
        elif isinstance(rule, (R.Gradient, R.GradTimesInput, R.GuidedBP, R.Deconv, R.RectGrad, R.ContrastiveEBP)):
            state = onehot
            top_value = onehot
        else:
            # LRP family: relevance starts at the explained logit's value.
            state = float(trace.logits[target.k]) * onehot
            top_value = state
        if start < 0:
            raise ContractViolationError("network has no layers")
    else:
        raise ConfigurationError(f"unknown target {target!r}")

    out = RelevanceTrace(rule=rule, target=target, reference=ref_trace)
    walker = _Walker(net, rule, trace, ref_trace)
    out.layers[names[start]] = top_value
    if is_deeplift:
        out.pairs[names[start]] = (np.maximum(top_value, 0.0), np.minimum(top_value, 0.0))

    for i in range(start, -1, -1):
        layer = net.layers[i]
        rec = trace.records[layer.name]
        ref_rec = ref_trace.records[layer.name] if ref_trace is not None else None
        state = walker.step(layer, rec, ref_rec, state)
        below = names[i - 1] if i > 0 else "input"
        if is_deeplift:
            ref_h = ref_trace.records[names[i - 1]].output if i > 0 else ref_trace.x
            h = trace.records[names[i - 1]].output if i > 0 else trace.x
            dh = h - ref_h
            pair = (state[0] * dh, state[1] * dh)
            value = pair[0] + pair[1]
            if below == "input":
                out.pairs["input"] = pair
                out.input = value
            else:
                out.pairs[below] = pair
                out.layers[below] = value
        else:
            if below == "input":
                if isinstance(rule, R.GradTimesInput):
                    state = state * x
                out.input = state
            else:
                out.layers[below] = state
    return out


def _normalize_by_sum(r):
    total = float(r.sum())
    if total == 0.0 or not np.isfinite(total):
        return np.zeros_like(r), True
    return r / total, False


def _contrastive_lrp(net, x, rule, target):
    """Contrastive combination: explain the target logit and its complement,
    normalize each trace by its sum, subtract, and rectify at the input."""
    if isinstance(target, Inject):
        # Injection bypasses the contrast; propagate the inner rule directly.
        inner = attribute(net, x, rule.inner, target)
        inner.rule = rule
        return inner
    x = np.asarray(x, dtype=np.float64)
    trace = forward(net, x)
    k = target.k
    n = net.n_logits()
    onehot = _onehot(k, n)
    top = [l.name for l in net.layers][-1]
    y = trace.logits
    t_target = attribute(net, x, rule.inner, Inject(top, y * onehot))
    t_rest = attribute(net, x, rule.inner, Inject(top, y * (1.0 - onehot)))

    out = RelevanceTrace(rule=rule, target=target)
    for name in t_target.layers:
        a, da = _normalize_by_sum(t_target.layers[name])
        b, db = _normalize_by_sum(t_rest.layers[name])
        out.layers[name] = a - b
        out.degenerate = out.degenerate or da or db
    a, da = _normalize_by_sum(t_target.input)
    b, db = _normalize_by_sum(t_rest.input)
    out.input = np.maximum(a - b, 0.0)
    out.degenerate = out.degenerate or da or db
    return out
