"""Confidence statements about two diagnostic tests from one paired 2x2 table.

The gain bound is a lower bound for q01 - q10 in the plain multinomial model.
The same number bounds the full latent class contrast

    pi1 (Se2 - Se1) - (1 - pi1) (Sp2 - Sp1)

and, when test 2 is at least as specific as test 1, the product
pi1 (Se2 - Se1).  It is computed from ``(k01, k10, k00 + k11)`` and the level
only, so there is nothing model-specific to choose.

The Se1 bound uses only ``(k10, k01, k11)`` and needs no prevalence
assumption.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal

from .bounds import (
    ENGINE_ID,
    STATISTIC_ID,
    BoundConfig,
    buehler_lower_diff,
    buehler_upper_ratio,
    upper_ratio_via_diff,
)
from .errors import ValidationError
from .model import PairedCounts

DISPLAY_DIGITS = 4


def floor_display(x: float, digits: int = DISPLAY_DIGITS) -> float:
    """Round down to ``digits`` decimals (safe for lower bounds)."""
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_FLOOR))


def ceil_display(x: float, digits: int = DISPLAY_DIGITS) -> float:
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_CEILING))


def _config(config) -> BoundConfig:
    if config is None:
        return BoundConfig()
    if isinstance(config, (int, float)):
        return BoundConfig(beta=float(config))
    return config


def sensitivity_gain_lower(k: PairedCounts, config: BoundConfig | None = None) -> float:
    """Lower confidence bound for pi1 (Se2 - Se1) under the restricted model."""
    return buehler_lower_diff(k.gain_trinomial(), _config(config)).value


def gain_lower_at_prevalence_cap(gain_product_lower: float, prevalence_max: float) -> float:
    """Turn the bound on pi1 (Se2 - Se1) into one on Se2 - Se1 given pi1 <= cap.

    Only a nonnegative bound may be divided by the cap; a negative bound is
    already valid for every pi1 <= 1 and is returned unchanged.
    """
    if not (0.0 < prevalence_max <= 1.0):
        raise ValidationError(f"prevalence cap must lie in (0, 1], got {prevalence_max}")
    if gain_product_lower < 0:
        return gain_product_lower
    return gain_product_lower / prevalence_max


def se1_upper(k: PairedCounts, config: BoundConfig | None = None, direct: bool = False) -> float:
    """Upper confidence bound for the sensitivity of test 1, free of the prevalence."""
    config = _config(config)
    trinomial = k.se1_trinomial()
    if direct:
        return buehler_upper_ratio(trinomial, config).value
    return upper_ratio_via_diff(trinomial, config).value


def se1_lower_implied(gain_lower_at_cap: float) -> float:
    """Se1 <= 1 - (Se2 - Se1): the Se1 ceiling implied by a gain bound."""
    return min(max(1.0 - gain_lower_at_cap, 0.0), 1.0)


def full_model_statement(bound: float, digits: int = DISPLAY_DIGITS) -> dict:
    """Confidence statement for the unrestricted model, with pi1 and Sp2 - Sp1 symbolic."""
    shown = f"{floor_display(bound, digits):.{digits}f}"
    return {
        "bound": bound,
        "text": f"Se2 - Se1 >= {shown}/π₁ + ((1 - π₁)/π₁)(Sp2 - Sp1)",
        "condition": "π₁ > 0",
        "note": "vacuous at π₁ = 0",
    }


@dataclass(frozen=True)
class AnalysisOptions:
    beta: float = 0.95
    prevalence_max: float | None = None
    include_full_model_statement: bool = True
    include_direct_ratio_bound: bool = False

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ValidationError(f"beta must lie in [0, 1], got {self.beta}")
        if self.prevalence_max is not None and not (0.0 < self.prevalence_max <= 1.0):
            raise ValidationError(f"prevalence_max must lie in (0, 1], got {self.prevalence_max}")


@dataclass(frozen=True)
class Report:
    counts: dict
    beta: float
    prevalence_max: float | None
    point_estimate: float
    gain_product_lower: float
    gain_lower_at_cap: float | None
    se1_upper: float
    se1_upper_direct: float | None
    se1_lower_implied: float | None
    full_model_note: dict | None
    cap_applied: bool | None
    method: dict = field(default_factory=dict)

    @property
    def display(self) -> dict:
        """Directionally rounded copies of the bounds, for printing."""
        out = {
            "gain_product_lower": floor_display(self.gain_product_lower),
            "se1_upper": ceil_display(self.se1_upper),
        }
        if self.gain_lower_at_cap is not None:
            out["gain_lower_at_cap"] = floor_display(self.gain_lower_at_cap)
        if self.se1_lower_implied is not None:
            out["se1_lower_implied"] = ceil_display(self.se1_lower_implied)
        if self.se1_upper_direct is not None:
            out["se1_upper_direct"] = ceil_display(self.se1_upper_direct)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["display"] = self.display
        return d


def analyze(k: PairedCounts, options: AnalysisOptions | None = None,
            config: BoundConfig | None = None) -> Report:
    options = options or AnalysisOptions()
    config = config or BoundConfig(beta=options.beta)
    if config.beta != options.beta:
        raise ValidationError("config.beta and options.beta disagree")

    gain = sensitivity_gain_lower(k, config)
    at_cap = implied = cap_applied = None
    if options.prevalence_max is not None:
        at_cap = gain_lower_at_prevalence_cap(gain, options.prevalence_max)
        cap_applied = gain >= 0
        implied = se1_lower_implied(at_cap)

    direct = se1_upper(k, config, direct=True) if options.include_direct_ratio_bound else None
    return Report(
        counts={"k00": k.k00, "k01": k.k01, "k10": k.k10, "k11": k.k11},
        beta=options.beta,
        prevalence_max=options.prevalence_max,
        point_estimate=(k.k01 - k.k10) / k.n,
        gain_product_lower=gain,
        gain_lower_at_cap=at_cap,
        se1_upper=se1_upper(k, config),
        se1_upper_direct=direct,
        se1_lower_implied=implied,
        full_model_note=full_model_statement(gain) if options.include_full_model_statement else None,
        cap_applied=cap_applied,
        method={
            "engine": ENGINE_ID,
            "statistic": STATISTIC_ID,
            "delta_tol": config.delta_tol,
            "nuisance_grid": config.nuisance_grid,
            "refine_iters": config.refine_iters,
        },
    )
