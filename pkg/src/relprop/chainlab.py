"""Matrix-chain convergence lab.

Simulates products of random matrices with the sign structures that arise in
modified backpropagation, tracks the column-cosine statistics whose
monotone convergence characterizes rank-1 collapse, and computes the
singular-value alignment diagnostics for weight and pattern matrices.

The running product is renormalized to Frobenius norm 1 after every step;
that is a pure scaling and leaves every cosine and singular-value ratio
unchanged while preventing overflow on long chains.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ContractViolationError, UndefinedAngleError
from .model.layers import Conv2D, Dense
from .model.network import _flatten_layers
from .numerics import max_pairwise_column_cosine, pairwise_column_cosines, svd_deflated, top2_singular_values

#: Backward-ordered width schedule resembling a 16-layer conv stack with the
#: kernels reduced to 1x1; scaled by ChainSpec.divisor for desk-scale runs.
VGG_LIKE_SCHEDULE = (10, 512, 512, 512, 512, 512, 256, 256, 256, 128, 128, 64, 64)

FAMILIES = ("normal", "relu_after_product", "nonnegative_clipped", "positive_abs", "alphabeta", "from_model")


@dataclass(frozen=True)
class ChainSpec:
    family: str = "positive_abs"
    dims: tuple | None = None  # explicit dimension schedule (len = steps + 1)
    dim: int = 128  # square chain width when dims is None
    steps: int = 16
    seed: int = 0
    alpha: float = 1.0
    beta: float = 0.0
    divisor: int = 1
    matrices: tuple | None = None  # from_model: explicit backward matrices

    def schedule(self) -> tuple:
        if self.family == "from_model":
            if not self.matrices:
                raise ContractViolationError("from_model chains need explicit matrices")
            dims = [self.matrices[0].shape[0]]
            dims += [m.shape[1] for m in self.matrices]
            return tuple(dims)
        if self.dims is not None:
            dims = tuple(max(2, d // self.divisor) for d in self.dims)
        else:
            dims = tuple([self.dim] * (self.steps + 1))
        if len(dims) != self.steps + 1:
            raise ContractViolationError(f"need {self.steps + 1} dims for {self.steps} steps, got {len(dims)}")
        return dims


@dataclass
class ChainStep:
    step: int
    s_min: float  # cosine of the widest column angle (the monotone statistic)
    s_median: float  # median pairwise column cosine
    sigma_ratio: float  # sigma1 / sigma2 of the running product


@dataclass
class ChainReport:
    spec: ChainSpec
    steps: list = field(default_factory=list)
    renormalized: bool = True


def _draw_matrix(spec: ChainSpec, step: int, rows: int, cols: int) -> np.ndarray:
    w = rng.normal(spec.seed, rng.CHAIN, step, 0, (rows, cols))
    if spec.family in ("normal", "relu_after_product"):
        return w
    if spec.family == "nonnegative_clipped":
        return np.maximum(w, 0.0)
    if spec.family == "positive_abs":
        return np.abs(w)
    if spec.family == "alphabeta":
        return spec.alpha * np.maximum(w, 0.0) + spec.beta * np.minimum(w, 0.0)
    raise ContractViolationError(f"unknown chain family {spec.family!r} (one of {FAMILIES})")


def _step_stats(step: int, product: np.ndarray) -> ChainStep:
    # Dead (all-zero) columns carry no direction and are excluded; the
    # relu_after_product family produces them once the product nears rank 1.
    live = product[:, np.linalg.norm(product, axis=0) > 0.0]
    if live.shape[1] >= 2:
        cosines = pairwise_column_cosines(live)
        s_min, s_median = float(cosines.min()), float(np.median(cosines))
    else:
        s_min = s_median = float("nan")
    s1, s2 = top2_singular_values(product)
    ratio = s1 / s2 if s2 > 1e-14 * max(s1, 1.0) else float("inf")
    return ChainStep(step=step, s_min=s_min, s_median=s_median, sigma_ratio=ratio)


def simulate_chain(spec: ChainSpec) -> ChainReport:
    """Build the running product step by step, starting from the last-layer
    matrix as in the backward pass, and record per-step statistics."""
    dims = spec.schedule()
    report = ChainReport(spec=spec)
    product = None
    for step in range(len(dims) - 1):
        if spec.family == "from_model":
            m = spec.matrices[step]
        else:
            m = _draw_matrix(spec, step, dims[step], dims[step + 1])
        product = m if product is None else product @ m
        if spec.family == "relu_after_product":
            product = np.maximum(product, 0.0)
        norm = np.linalg.norm(product)
        if norm == 0.0:
            raise UndefinedAngleError(f"running product vanished at step {step + 1}")
        product = product / norm
        report.steps.append(_step_stats(step + 1, product))
    return report


def sn_sequence(matrices) -> list:
    """Cosine of the widest column angle of the running product after each
    multiplication (the monotone sequence for non-negative chains)."""
    product = None
    out = []
    for step, m in enumerate(matrices):
        m = np.asarray(m, dtype=np.float64)
        product = m if product is None else product @ m
        norms = np.linalg.norm(product, axis=0)
        if np.any(norms == 0.0):
            raise UndefinedAngleError(f"zero column in the running product at step {step + 1}")
        product = product / np.linalg.norm(product)
        out.append(max_pairwise_column_cosine(product))
    return out


@dataclass
class Theorem1Diagnosis:
    ok: bool
    zero_columns: tuple = ()
    orthogonal_pairs: tuple = ()


def theorem1_conditions(m: np.ndarray, tol: float = 1e-12) -> Theorem1Diagnosis:
    """Check a non-negative matrix against the excluded limit shapes: a zero
    column, or two mutually orthogonal columns."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ContractViolationError("need a matrix")
    if np.any(m < 0):
        raise ContractViolationError("conditions are defined for non-negative matrices")
    norms = np.linalg.norm(m, axis=0)
    zero_cols = tuple(int(i) for i in np.flatnonzero(norms <= tol))
    pairs = []
    for i in range(m.shape[1]):
        if norms[i] <= tol:
            continue
        for j in range(i + 1, m.shape[1]):
            if norms[j] <= tol:
                continue
            if float(m[:, i] @ m[:, j]) <= tol * norms[i] * norms[j]:
                pairs.append((i, j))
    return Theorem1Diagnosis(ok=not zero_cols and not pairs, zero_columns=zero_cols, orthogonal_pairs=tuple(pairs))


def interlayer_alignment(w_list) -> list:
    """sigma1/sigma2 of the inter-layer coupling sqrt(S_l) V_l U_{l+1}
    sqrt(S_{l+1}) for each consecutive matrix pair (infinite when sigma2
    vanishes)."""
    mats = [np.asarray(w, dtype=np.float64) for w in w_list]
    if len(mats) < 2:
        raise ContractViolationError("alignment needs at least two matrices")
    decomps = []
    for m in mats:
        u, s, vt = svd_deflated(m)
        decomps.append((u, s, vt))
    ratios = []
    for l in range(len(mats) - 1):
        _, s_l, vt_l = decomps[l]
        u_next, s_next, _ = decomps[l + 1]
        if mats[l].shape[1] != mats[l + 1].shape[0]:
            raise ContractViolationError(f"matrices {l} and {l + 1} are not composable")
        t = np.diag(np.sqrt(s_l)) @ vt_l @ u_next @ np.diag(np.sqrt(s_next))
        s1, s2 = top2_singular_values(t)
        ratios.append(s1 / s2 if s2 > 1e-14 * max(s1, 1.0) else float("inf"))
    return ratios


def model_backward_matrices(net) -> list:
    """Backward-ordered (input-dim x output-dim) matrices of the linear
    layers; 3x3 conv kernels are sliced to their center 1x1 tap."""
    mats = []
    for layer in _flatten_layers(net.layers):
        if isinstance(layer, Dense):
            mats.append(net.weight(layer.name).T)
        elif isinstance(layer, Conv2D):
            w = net.weight(layer.name)
            mats.append(w[w.shape[0] // 2, w.shape[1] // 2])  # (ci, co)
    return list(reversed(mats))


def pattern_ratio_report(net) -> dict:
    """Per-layer sigma1/sigma2 for the pattern matrix A, the weights W, and
    the Hadamard product W*A; degenerate-flagged layers are excluded."""
    if net.patterns is None:
        raise ContractViolationError("network has no fitted pattern set")
    out = {}
    for layer in _flatten_layers(net.layers):
        if not isinstance(layer, (Dense, Conv2D)):
            continue
        name = layer.name
        if name not in net.patterns.patterns:
            continue
        deg = net.patterns.degenerate.get(name)
        if deg is not None and bool(np.all(deg)):
            continue
        w = net.weight(name)
        a = net.patterns.patterns[name]
        if isinstance(layer, Conv2D):
            w = w[w.shape[0] // 2, w.shape[1] // 2].T
            a = a[a.shape[0] // 2, a.shape[1] // 2].T
        row = {}
        for label, mat in (("A", a), ("W", w), ("WA", w * a)):
            s1, s2 = top2_singular_values(mat)
            row[label] = s1 / s2 if s2 > 1e-14 * max(s1, 1.0) else float("inf")
        out[name] = row
    return out


def format_chain_report(report: ChainReport) -> str:
    lines = ["step,s_n_min,s_n_median,sigma_ratio"]
    for st in report.steps:
        lines.append(f"{st.step},{st.s_min!r},{st.s_median!r},{st.sigma_ratio!r}")
    return "\n".join(lines) + "\n"


def format_alignment_report(ratios) -> str:
    lines = ["layer_pair,ratio"]
    for i, ratio in enumerate(ratios):
        lines.append(f"{i},{ratio!r}")
    return "\n".join(lines) + "\n"
