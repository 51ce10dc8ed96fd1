"""Cosine similarity convergence (CSC).

Standard-normal relevance vectors are injected at a chosen layer and
backpropagated; per layer, the pairwise alignment (absolute cosine) between
the propagated tensors measures how strongly the rule's backward chain has
collapsed to a single direction.  For spatial layers the alignment is taken
over the channel axis per feature-map location; dense layers contribute one
value.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import rng
from ..attribution import Inject, attribute, format_rule
from ..errors import ContractViolationError
from ..model.network import forward
from ..numerics import percentile


@dataclass
class CSCLayerRecord:
    layer: str
    values: np.ndarray  # pooled valid cosines (pairs x locations)
    n_missing: int = 0

    @property
    def n_locations(self) -> int:
        return int(self.values.size)

    @property
    def median(self) -> float:
        return float(np.median(self.values)) if self.values.size else float("nan")

    def quantile(self, q: float) -> float:
        return percentile(self.values, q) if self.values.size else float("nan")


@dataclass
class CSCPath:
    rule: str
    inject_layer: str
    n_vectors: int
    seed: int
    records: list = field(default_factory=list)  # ordered input -> inject layer

    def record(self, layer: str) -> CSCLayerRecord:
        for rec in self.records:
            if rec.layer == layer:
                return rec
        raise KeyError(layer)


def _location_cosines(a: np.ndarray, b: np.ndarray):
    """Per-location alignment over the channel axis; (values, n_missing).

    Alignment is the absolute cosine: a rank-1 backward map sends every
    injected vector to +-c, where the sign is an artifact of the injected
    vector (it merely flips the map, exactly as in the sign-flip handling of
    the sanity checks), so convergence is measured modulo sign.
    """
    if a.ndim == 3:
        dot = (a * b).sum(axis=-1)
        na = np.linalg.norm(a, axis=-1)
        nb = np.linalg.norm(b, axis=-1)
    else:
        dot = np.array([np.dot(a.ravel(), b.ravel())])
        na = np.array([np.linalg.norm(a)])
        nb = np.array([np.linalg.norm(b)])
    valid = (na > 0) & (nb > 0)
    vals = np.clip(np.abs(dot[valid]) / (na[valid] * nb[valid]), 0.0, 1.0)
    return vals.ravel(), int((~valid).sum())


def csc_run(net, x, rule, inject_layer=None, n_vectors=5, seed=0, sample_index=0, threads=1) -> CSCPath:
    """One CSC path: inject ``n_vectors`` standard-normal vectors at
    ``inject_layer`` (default: the final layer), backpropagate each, and pool
    per-layer pairwise cosines over all unordered vector pairs.

    Vectors come from counter-based streams keyed by (seed, sample_index,
    vector index), so the path is reproducible regardless of thread count.
    Locations where either propagated tensor vanishes are excluded and
    counted as missing.
    """
    if n_vectors < 2:
        raise ContractViolationError("CSC needs at least two injected vectors")
    names = [l.name for l in net.layers]
    inject_layer = names[-1] if inject_layer is None else inject_layer
    trace = forward(net, np.asarray(x, dtype=np.float64))
    shape = trace.records[inject_layer].output.shape

    vectors = [rng.normal(seed, rng.CSC_VECTOR, sample_index, j, shape) for j in range(n_vectors)]

    def run(v):
        return attribute(net, x, rule, Inject(inject_layer, v))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(run, vectors))
    else:
        traces = [run(v) for v in vectors]

    k = names.index(inject_layer)
    layer_order = ["input"] + names[: k + 1]
    path = CSCPath(rule=format_rule(rule), inject_layer=inject_layer, n_vectors=n_vectors, seed=seed)
    for layer in layer_order:
        pooled = []
        missing = 0
        for i in range(n_vectors):
            for j in range(i + 1, n_vectors):
                vals, miss = _location_cosines(traces[i].relevance(layer), traces[j].relevance(layer))
                pooled.append(vals)
                missing += miss
        values = np.concatenate(pooled) if pooled else np.empty(0)
        path.records.append(CSCLayerRecord(layer=layer, values=values, n_missing=missing))
    return path


def pool_paths(paths) -> CSCPath:
    """Pool several paths (e.g. one per input) into one aggregate path."""
    paths = list(paths)
    first = paths[0]
    pooled = CSCPath(
        rule=first.rule, inject_layer=first.inject_layer, n_vectors=first.n_vectors, seed=first.seed
    )
    for idx, rec in enumerate(first.records):
        values = np.concatenate([p.records[idx].values for p in paths])
        missing = sum(p.records[idx].n_missing for p in paths)
        pooled.records.append(CSCLayerRecord(layer=rec.layer, values=values, n_missing=missing))
    return pooled


def format_csc_report(path: CSCPath) -> str:
    """Structured-text serialization: one record line per layer."""
    lines = []
    for rec in path.records:
        lines.append(
            f"rule={path.rule} layer={rec.layer} n_locations={rec.n_locations} "
            f"median={rec.median!r} q10={rec.quantile(10.0)!r} q90={rec.quantile(90.0)!r}"
        )
    return "\n".join(lines) + "\n"


def rank1_certificate(relevances, tol: float = 1e-6) -> bool:
    """True when every pairwise alignment (absolute cosine) among the
    propagated relevances of linearly independent injected vectors reaches 1
    within tolerance: all outputs are then parallel up to sign, certifying an
    effectively rank-1 propagation matrix."""
    rels = [np.asarray(r).ravel() for r in relevances]
    if len(rels) < 2:
        raise ContractViolationError("certificate needs at least two propagated vectors")
    for i in range(len(rels)):
        for j in range(i + 1, len(rels)):
            na = np.linalg.norm(rels[i])
            nb = np.linalg.norm(rels[j])
            if na == 0.0 or nb == 0.0:
                return False
            if abs(np.dot(rels[i], rels[j])) / (na * nb) < 1.0 - tol:
                return False
    return True
