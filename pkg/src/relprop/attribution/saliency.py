"""Saliency-map extraction, display normalization, and PGM rendering."""

from dataclasses import dataclass

import numpy as np

from ..fgrid import write_pgm
from . import rules as R


@dataclass
class SaliencyMap:
    grid: np.ndarray  # H x W
    signed: bool
    scale: float | None = None  # absolute max used by normalization
    degenerate: bool = False


def map_is_signed(rule) -> bool:
    """Rules whose maps carry negative relevance normalize to [-1, 1];
    non-negative methods normalize to [0, 1]."""
    return not isinstance(
        rule, (R.Gradient, R.GuidedBP, R.Deconv, R.RectGrad, R.ZPlus, R.DTD, R.ContrastiveLRP)
    )


def saliency_from_trace(trace) -> SaliencyMap:
    """Aggregate the input relevance into a 2-D map.

    Gradient-family rules sum absolute channel values; the relevance-style
    rules keep the signed channel sum.  Vector inputs become 1 x N grids.
    """
    r = trace.input
    absolute = not R.rule_signedness(trace.rule)
    if r.ndim == 3:
        grid = np.abs(r).sum(axis=-1) if absolute else r.sum(axis=-1)
    elif r.ndim == 1:
        grid = (np.abs(r) if absolute else r).reshape(1, -1)
    else:
        grid = np.abs(r) if absolute else r
    return SaliencyMap(grid=grid, signed=map_is_signed(trace.rule), degenerate=trace.degenerate)


def normalize_for_display(m: SaliencyMap) -> SaliencyMap:
    """Scale by the absolute maximum: signed maps to [-1, 1], non-negative
    maps to [0, 1].  The all-zero map stays zero and is flagged."""
    scale = float(np.abs(m.grid).max()) if m.grid.size else 0.0
    if scale == 0.0:
        return SaliencyMap(np.zeros_like(m.grid), m.signed, scale=0.0, degenerate=True)
    return SaliencyMap(m.grid / scale, m.signed, scale=scale, degenerate=m.degenerate)


def to_unit_interval(m: SaliencyMap) -> np.ndarray:
    """Normalized map rescaled into [0, 1] for SSIM comparisons: signed maps
    shift from [-1, 1], non-negative maps clip."""
    norm = normalize_for_display(m) if m.scale is None else m
    if norm.signed:
        return (norm.grid + 1.0) / 2.0
    return np.clip(norm.grid, 0.0, 1.0)


def flipped(m: SaliencyMap) -> SaliencyMap:
    return SaliencyMap(-m.grid, m.signed, degenerate=m.degenerate)


def render_pgm(path, m: SaliencyMap) -> None:
    write_pgm(path, to_unit_interval(m))
