import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nogold.errors import ValidationError
from nogold.inference import (
    AnalysisOptions,
    analyze,
    ceil_display,
    floor_display,
    full_model_statement,
    gain_lower_at_prevalence_cap,
    se1_lower_implied,
    se1_upper,
    sensitivity_gain_lower,
)
from nogold.model import PairedCounts

TABLE = PairedCounts(210, 20, 4, 22)


def test_display_rounding_is_directional():
    assert floor_display(0.0290625) == 0.029
    assert ceil_display(0.6190476190476191) == 0.6191
    assert floor_display(-0.00001) == -0.0001
    assert ceil_display(0.83) == 0.83


@given(st.floats(-1, 1))
def test_display_brackets_value(x):
    lo, hi = floor_display(x), ceil_display(x)
    assert lo <= x <= hi
    assert hi - lo <= 1e-4 + 1e-12


def test_prevalence_cap():
    assert gain_lower_at_prevalence_cap(0.03, 0.15) == pytest.approx(0.2)
    assert gain_lower_at_prevalence_cap(-0.02, 0.15) == -0.02
    with pytest.raises(ValidationError):
        gain_lower_at_prevalence_cap(0.03, 0.0)
    assert se1_lower_implied(0.25) == 0.75
    assert se1_lower_implied(-0.5) == 1.0


def test_full_model_statement_keeps_prevalence_symbolic():
    s = full_model_statement(0.0290625)
    assert "0.0290/π₁" in s["text"] and "(Sp2 - Sp1)" in s["text"]
    assert s["condition"] == "π₁ > 0"


def test_analyze_example_table():
    report = analyze(TABLE, AnalysisOptions(beta=0.95, prevalence_max=0.15))
    assert report.gain_product_lower == sensitivity_gain_lower(TABLE, 0.95)
    assert report.gain_lower_at_cap == report.gain_product_lower / 0.15
    assert report.se1_upper == se1_upper(TABLE, 0.95)
    assert report.se1_lower_implied == pytest.approx(1 - report.gain_lower_at_cap)
    assert report.cap_applied is True
    assert report.point_estimate == pytest.approx(16 / 256)
    d = report.to_dict()
    assert d["display"]["se1_upper"] == ceil_display(report.se1_upper)
    assert json.loads(json.dumps(d)) == d


def test_analyze_without_cap():
    report = analyze(PairedCounts(5, 1, 3, 2), AnalysisOptions(beta=0.9))
    assert report.gain_lower_at_cap is None and report.se1_lower_implied is None
    assert "gain_lower_at_cap" not in report.display


def test_options_validation():
    with pytest.raises(ValidationError):
        AnalysisOptions(beta=1.5)
    with pytest.raises(ValidationError):
        AnalysisOptions(prevalence_max=1.2)
