from .engine import Inject, Logit, RelevanceTrace, attribute, deeplift_reference
from .patterns import PatternSet, fit_patterns
from .rules import (
    AlphaBeta,
    Blurred,
    ContrastiveEBP,
    ContrastiveLRP,
    Deconv,
    DeepLIFT,
    DTD,
    Gradient,
    GradTimesInput,
    GuidedBP,
    LRPCmp,
    LRPz,
    PatternAttribution,
    PatternNet,
    RectGrad,
    WBox,
    ZPlus,
    format_rule,
    parse_rule,
)
from .saliency import SaliencyMap, flipped, map_is_signed, normalize_for_display, render_pgm, saliency_from_trace, to_unit_interval

__all__ = [
    "AlphaBeta",
    "Blurred",
    "ContrastiveEBP",
    "ContrastiveLRP",
    "Deconv",
    "DeepLIFT",
    "DTD",
    "Gradient",
    "GradTimesInput",
    "GuidedBP",
    "Inject",
    "LRPCmp",
    "LRPz",
    "Logit",
    "PatternAttribution",
    "PatternNet",
    "PatternSet",
    "RectGrad",
    "RelevanceTrace",
    "SaliencyMap",
    "WBox",
    "ZPlus",
    "attribute",
    "deeplift_reference",
    "fit_patterns",
    "flipped",
    "format_rule",
    "map_is_signed",
    "normalize_for_display",
    "parse_rule",
    "render_pgm",
    "saliency_from_trace",
    "to_unit_interval",
]
