from .csc import CSCLayerRecord, CSCPath, csc_run, format_csc_report, pool_paths, rank1_certificate
from .sanity import (
    SanityReport,
    SanityStage,
    format_sanity_report,
    random_logit_other,
    random_logit_run,
    sanity_check_run,
)

__all__ = [
    "CSCLayerRecord",
    "CSCPath",
    "SanityReport",
    "SanityStage",
    "csc_run",
    "format_csc_report",
    "format_sanity_report",
    "pool_paths",
    "random_logit_other",
    "random_logit_run",
    "rank1_certificate",
    "sanity_check_run",
]
