"""Attribution rule configurations and the rule-string grammar.

Grammar (one rule per string)::

    gradient | gradxinput | zplus | lrpz[:eps] | alphabeta:A:B
    dtd[:w2 | :wB:l:u | :zplus] | patternnet | patternattr
    deeplift[:zeros | :blur:S][:ablation] | guidedbp | deconv
    rectgrad[:q] | lrpcmp:A:B | contrastive:<inner> | cebp
"""

from dataclasses import dataclass, field

from ..errors import ConfigurationError


@dataclass(frozen=True)
class Gradient:
    pass


@dataclass(frozen=True)
class GradTimesInput:
    pass


@dataclass(frozen=True)
class ZPlus:
    pass


@dataclass(frozen=True)
class LRPz:
    epsilon: float = 1e-9

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigurationError("lrpz stabilizer must be >= 0")


@dataclass(frozen=True)
class AlphaBeta:
    alpha: float
    beta: float

    def __post_init__(self):
        if abs(self.alpha - self.beta - 1.0) > 1e-12 or self.alpha < 1.0:
            raise ConfigurationError(
                f"alphabeta requires alpha - beta = 1 and alpha >= 1, got ({self.alpha}, {self.beta})"
            )


@dataclass(frozen=True)
class WBox:
    """Bounded-input box for the wB input rule; None defers to the bundle."""

    lower: float | None = None
    upper: float | None = None


@dataclass(frozen=True)
class DTD:
    """z+ everywhere, with a dedicated rule at the input layer."""

    input_rule: object = "w2"  # "w2" | "zplus" | WBox

    def __post_init__(self):
        if self.input_rule not in ("w2", "zplus") and not isinstance(self.input_rule, WBox):
            raise ConfigurationError(f"dtd input rule must be w2, zplus, or a wB box, got {self.input_rule!r}")


@dataclass(frozen=True)
class PatternNet:
    pass


@dataclass(frozen=True)
class PatternAttribution:
    pass


@dataclass(frozen=True)
class Blurred:
    sigma: float = 2.0


@dataclass(frozen=True)
class DeepLIFT:
    reference: object = "zeros"  # "zeros" | Blurred
    ablation: bool = False

    def __post_init__(self):
        if self.reference != "zeros" and not isinstance(self.reference, Blurred):
            raise ConfigurationError(f"deeplift reference must be zeros or blurred, got {self.reference!r}")


@dataclass(frozen=True)
class GuidedBP:
    pass


@dataclass(frozen=True)
class Deconv:
    pass


@dataclass(frozen=True)
class RectGrad:
    q: float = 98.0

    def __post_init__(self):
        if not 0.0 <= self.q <= 100.0:
            raise ConfigurationError(f"rectgrad percentile must be in [0, 100], got {self.q}")


@dataclass(frozen=True)
class LRPCmp:
    """LRP_z on dense layers, alpha/beta on conv layers."""

    alpha: float
    beta: float
    epsilon: float = 1e-9

    def __post_init__(self):
        AlphaBeta(self.alpha, self.beta)


@dataclass(frozen=True)
class ContrastiveLRP:
    inner: object = field(default_factory=ZPlus)


@dataclass(frozen=True)
class ContrastiveEBP:
    pass


def _parse_float(token: str, text: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ConfigurationError(f"invalid number {token!r} in rule {text!r}") from None


_RULE_NAMES = (
    "gradient, gradxinput, zplus, lrpz[:eps], alphabeta:A:B, dtd[:w2|:wB:l:u|:zplus], "
    "patternnet, patternattr, deeplift[:zeros|:blur:S][:ablation], guidedbp, deconv, "
    "rectgrad[:q], lrpcmp:A:B, contrastive:<inner>, cebp"
)


def parse_rule(text: str):
    """Parse a rule string into its configuration object."""
    parts = text.strip().split(":")
    head, args = parts[0], parts[1:]

    def need(n):
        if len(args) != n:
            raise ConfigurationError(f"rule {head!r} takes {n} parameter(s), got {len(args)} in {text!r}")

    if head == "gradient":
        need(0)
        return Gradient()
    if head == "gradxinput":
        need(0)
        return GradTimesInput()
    if head == "zplus":
        need(0)
        return ZPlus()
    if head == "lrpz":
        if len(args) > 1:
            raise ConfigurationError(f"lrpz takes at most one parameter in {text!r}")
        return LRPz(_parse_float(args[0], text)) if args else LRPz()
    if head == "alphabeta":
        need(2)
        return AlphaBeta(_parse_float(args[0], text), _parse_float(args[1], text))
    if head == "dtd":
        if not args:
            return DTD()
        if args[0] == "w2":
            need(1)
            return DTD("w2")
        if args[0] == "zplus":
            need(1)
            return DTD("zplus")
        if args[0] == "wB":
            need(3)
            return DTD(WBox(_parse_float(args[1], text), _parse_float(args[2], text)))
        raise ConfigurationError(f"dtd variant must be w2, wB, or zplus, got {args[0]!r}")
    if head == "patternnet":
        need(0)
        return PatternNet()
    if head == "patternattr":
        need(0)
        return PatternAttribution()
    if head == "deeplift":
        reference = "zeros"
        ablation = False
        rest = list(args)
        if rest and rest[-1] == "ablation":
            ablation = True
            rest.pop()
        if rest:
            if rest[0] == "zeros":
                rest.pop(0)
            elif rest[0] == "blur":
                if len(rest) < 2:
                    raise ConfigurationError(f"deeplift blur needs a sigma in {text!r}")
                reference = Blurred(_parse_float(rest[1], text))
                rest = rest[2:]
            else:
                raise ConfigurationError(f"unknown deeplift option {rest[0]!r} in {text!r}")
        if rest:
            raise ConfigurationError(f"trailing deeplift options {rest} in {text!r}")
        return DeepLIFT(reference, ablation)
    if head == "guidedbp":
        need(0)
        return GuidedBP()
    if head == "deconv":
        need(0)
        return Deconv()
    if head == "rectgrad":
        if len(args) > 1:
            raise ConfigurationError(f"rectgrad takes at most one parameter in {text!r}")
        return RectGrad(_parse_float(args[0], text)) if args else RectGrad()
    if head == "lrpcmp":
        need(2)
        return LRPCmp(_parse_float(args[0], text), _parse_float(args[1], text))
    if head == "contrastive":
        if not args:
            raise ConfigurationError(f"contrastive needs an inner rule in {text!r}")
        return ContrastiveLRP(parse_rule(":".join(args)))
    if head == "cebp":
        need(0)
        return ContrastiveEBP()
    raise ConfigurationError(f"unknown rule {head!r}; valid rules: {_RULE_NAMES}")


def rule_signedness(rule) -> bool:
    """True if the rule's saliency keeps sign (channel sum), False for the
    gradient family (absolute channel sum)."""
    return not isinstance(rule, (Gradient, GuidedBP, Deconv, RectGrad))


def format_rule(rule) -> str:
    """Canonical rule string; ``parse_rule(format_rule(r)) == r``."""
    if isinstance(rule, Gradient):
        return "gradient"
    if isinstance(rule, GradTimesInput):
        return "gradxinput"
    if isinstance(rule, ZPlus):
        return "zplus"
    if isinstance(rule, LRPz):
        return f"lrpz:{rule.epsilon:g}"
    if isinstance(rule, AlphaBeta):
        return f"alphabeta:{rule.alpha:g}:{rule.beta:g}"
    if isinstance(rule, DTD):
        if rule.input_rule == "w2":
            return "dtd:w2"
        if rule.input_rule == "zplus":
            return "dtd:zplus"
        return f"dtd:wB:{rule.input_rule.lower:g}:{rule.input_rule.upper:g}"
    if isinstance(rule, PatternNet):
        return "patternnet"
    if isinstance(rule, PatternAttribution):
        return "patternattr"
    if isinstance(rule, DeepLIFT):
        ref = "zeros" if rule.reference == "zeros" else f"blur:{rule.reference.sigma:g}"
        return f"deeplift:{ref}:ablation" if rule.ablation else f"deeplift:{ref}"
    if isinstance(rule, GuidedBP):
        return "guidedbp"
    if isinstance(rule, Deconv):
        return "deconv"
    if isinstance(rule, RectGrad):
        return f"rectgrad:{rule.q:g}"
    if isinstance(rule, LRPCmp):
        return f"lrpcmp:{rule.alpha:g}:{rule.beta:g}"
    if isinstance(rule, ContrastiveLRP):
        return f"contrastive:{format_rule(rule.inner)}"
    if isinstance(rule, ContrastiveEBP):
        return "cebp"
    raise ConfigurationError(f"unknown rule object {rule!r}")
