"""Parameter-randomization sanity checks and the random-logit test.

Both compare normalized saliency maps with SSIM.  For the cascading sanity
check, maps whose sign flipped under randomization still count as similar:
the reported value is the maximum of SSIM against the randomized map and
against its inversion.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import rng
from ..attribution import Logit, attribute, flipped, normalize_for_display, saliency_from_trace, to_unit_interval
from ..errors import ContractViolationError
from ..model.network import cascading_schedule, forward, randomize_parameters
from ..numerics import ssim


@dataclass
class SanityStage:
    stage: int
    layer_set: tuple
    ssim: float  # nan when a map degenerated
    sign_flipped: bool
    degenerate: bool = False


@dataclass
class SanityReport:
    rule: str
    seed: int
    target: int
    stages: list = field(default_factory=list)


def _unit_map(net, x, rule, k):
    m = normalize_for_display(saliency_from_trace(attribute(net, x, rule, Logit(k))))
    return m


def _compare(base_unit, rand_map):
    """Max of SSIM(base, rand) and SSIM(base, -rand) on [0, 1]-scaled maps."""
    plain = ssim(base_unit, to_unit_interval(rand_map))
    inverted = ssim(base_unit, to_unit_interval(flipped(rand_map)))
    if inverted > plain:
        return inverted, True
    return plain, False


def sanity_check_run(net, x, rule, seed, target=None) -> SanityReport:
    """Cascading randomization from the last parameterized layer to the first.

    Stage 0 randomizes nothing (SSIM exactly 1); stage k randomizes the last
    k parameterized layers and records the sign-flip-max SSIM between the
    original and randomized saliency maps.
    """
    from ..attribution import format_rule

    x = np.asarray(x, dtype=np.float64)
    if target is None:
        target = int(np.argmax(forward(net, x).logits))
    base = _unit_map(net, x, rule, target)
    report = SanityReport(rule=format_rule(rule), seed=seed, target=target)
    base_unit = to_unit_interval(base)
    report.stages.append(SanityStage(0, (), 1.0 if not base.degenerate else float("nan"), False, base.degenerate))
    for stage, layer_set in enumerate(cascading_schedule(net), start=1):
        rand_net = randomize_parameters(net, layer_set, seed)
        rand_map = normalize_for_display(saliency_from_trace(attribute(rand_net, x, rule, Logit(target))))
        if base.degenerate or rand_map.degenerate:
            report.stages.append(SanityStage(stage, tuple(sorted(layer_set)), float("nan"), False, True))
            continue
        value, flipped_won = _compare(base_unit, rand_map)
        report.stages.append(SanityStage(stage, tuple(sorted(layer_set)), value, flipped_won))
    return report


def format_sanity_report(report: SanityReport) -> str:
    lines = ["stage,layer_set_size,ssim,sign_flipped"]
    for st in report.stages:
        lines.append(f"{st.stage},{len(st.layer_set)},{st.ssim!r},{int(st.sign_flipped)}")
    return "\n".join(lines) + "\n"


def random_logit_run(net, x, rule, true_k, seed, sign_flip_max=True) -> float:
    """SSIM between the saliency maps explaining the true logit and a
    uniformly drawn different logit.

    By default the comparison uses the same sign-flip-max protocol as the
    sanity check: on random-weight models the explained logit's value (and
    with it the whole relevance-style map) carries an arbitrary sign, which
    would otherwise mask the structural similarity the test measures.
    """
    n = net.n_logits()
    if n < 2:
        raise ContractViolationError("random-logit test needs at least two logits")
    if not 0 <= true_k < n:
        raise ContractViolationError(f"logit index {true_k} outside [0, {n})")
    draw = int(rng.stream(seed, rng.RANDOM_LOGIT, true_k, 0).integers(0, n - 1))
    other_k = draw + 1 if draw >= true_k else draw
    m_true = normalize_for_display(saliency_from_trace(attribute(net, x, rule, Logit(true_k))))
    m_other = normalize_for_display(saliency_from_trace(attribute(net, x, rule, Logit(other_k))))
    plain = float(ssim(to_unit_interval(m_true), to_unit_interval(m_other)))
    if not sign_flip_max:
        return plain
    value, _ = _compare(to_unit_interval(m_true), m_other)
    return value


def random_logit_other(net, true_k, seed) -> int:
    """The logit index random_logit_run compares against (for reports)."""
    n = net.n_logits()
    draw = int(rng.stream(seed, rng.RANDOM_LOGIT, true_k, 0).integers(0, n - 1))
    return draw + 1 if draw >= true_k else draw
