"""Exact one-sided confidence bounds for comparing two diagnostic tests without a gold standard."""

from .bounds import (
    ENGINE_ID,
    STATISTIC_ID,
    BoundConfig,
    BoundResult,
    buehler_lower_diff,
    buehler_upper_diff,
    buehler_upper_ratio,
    upper_ratio_via_diff,
)
from .errors import InfeasiblePointError, ResourceError, ValidationError
from .inference import (
    AnalysisOptions,
    Report,
    analyze,
    gain_lower_at_prevalence_cap,
    se1_lower_implied,
    se1_upper,
    sensitivity_gain_lower,
)
from .model import JointDensity, LatentParams, PairedCounts, TrinomialCounts, mu

__version__ = "0.1.0"

__all__ = [
    "ENGINE_ID",
    "STATISTIC_ID",
    "AnalysisOptions",
    "BoundConfig",
    "BoundResult",
    "InfeasiblePointError",
    "JointDensity",
    "LatentParams",
    "PairedCounts",
    "Report",
    "ResourceError",
    "TrinomialCounts",
    "ValidationError",
    "analyze",
    "buehler_lower_diff",
    "buehler_upper_diff",
    "buehler_upper_ratio",
    "gain_lower_at_prevalence_cap",
    "mu",
    "se1_lower_implied",
    "se1_upper",
    "sensitivity_gain_lower",
    "upper_ratio_via_diff",
]
