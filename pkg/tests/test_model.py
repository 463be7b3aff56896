import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nogold.errors import ValidationError
from nogold.model import (
    JointDensity,
    LatentParams,
    PairedCounts,
    TrinomialCounts,
    binomial_logpmf,
    characteristics,
    enumerate_trinomial_outcomes,
    multinomial_logpmf,
    multinomial_logpmf_matrix,
    mu,
    n_trinomial_outcomes,
    table_outcome_array,
    trinomial_logpmf,
)


def test_mu_is_mixture_of_rows():
    theta = LatentParams.from_prevalence(0.25, (0.7, 0.1, 0.1, 0.1), (0.1, 0.2, 0.3, 0.4))
    q = mu(theta).q
    assert q == pytest.approx((0.55, 0.125, 0.15, 0.175))


def test_characteristics_sum_over_the_other_bit():
    theta = LatentParams.from_prevalence(0.5, (0.4, 0.3, 0.2, 0.1), (0.1, 0.2, 0.3, 0.4))
    t1, t2 = characteristics(theta, 1), characteristics(theta, 2)
    assert (t1.sp, t1.se) == pytest.approx((0.7, 0.7))
    assert (t2.sp, t2.se) == pytest.approx((0.6, 0.6))
    assert not theta.is_restricted()
    with pytest.raises(ValidationError):
        characteristics(theta, 3)


def test_simplex_validation():
    with pytest.raises(ValidationError):
        JointDensity((0.5, 0.5, 0.1, 0.0))
    with pytest.raises(ValidationError):
        JointDensity((1.1, -0.1, 0.0, 0.0))
    with pytest.raises(ValidationError):
        JointDensity((0.5, 0.5, float("nan"), 0.0))
    # tiny rounding is absorbed
    assert sum(JointDensity((0.1, 0.2, 0.3, 0.4 + 1e-14)).q) == pytest.approx(1.0, abs=1e-15)


def test_counts_validation():
    with pytest.raises(ValidationError):
        PairedCounts(1, -1, 0, 0)
    with pytest.raises(ValidationError):
        PairedCounts(0, 0, 0, 0)
    with pytest.raises(ValidationError):
        PairedCounts(1.5, 0, 0, 0)
    with pytest.raises(ValidationError):
        TrinomialCounts(True, 0, 0)


def test_trinomial_collapses():
    k = PairedCounts(210, 20, 4, 22)
    assert tuple(k.gain_trinomial()) == (20, 4, 232)
    assert tuple(k.se1_trinomial()) == (4, 20, 22)
    assert tuple(k.se1_trinomial().swapped()) == (20, 4, 22)
    assert JointDensity.from_counts(k).row_marginal == pytest.approx((230 / 256, 26 / 256))
    assert JointDensity.from_counts(k).col_marginal == pytest.approx((214 / 256, 42 / 256))


def test_logpmf_matches_closed_forms():
    assert math.exp(binomial_logpmf(10, 0.3, 4)) == pytest.approx(math.comb(10, 4) * 0.3**4 * 0.7**6)
    assert math.exp(trinomial_logpmf(4, (0.2, 0.3, 0.5), (1, 1, 2))) == pytest.approx(12 * 0.2 * 0.3 * 0.25)
    # zero probability with zero count contributes nothing
    assert trinomial_logpmf(3, (0.0, 0.5, 0.5), (0, 1, 2)) == pytest.approx(math.log(3 / 8))
    assert trinomial_logpmf(3, (0.0, 0.5, 0.5), (1, 1, 1)) == -math.inf
    with pytest.raises(ValidationError):
        trinomial_logpmf(3, (0.2, 0.3, 0.5), (1, 1, 2))


def test_large_n_is_stable():
    lp = multinomial_logpmf(100000, JointDensity((0.25,) * 4), PairedCounts(25000, 25000, 25000, 25000))
    assert np.isfinite(lp) and lp < 0
    assert lp == pytest.approx(-0.5 * 3 * math.log(2 * math.pi * 100000 / 16) - 1.5 * math.log(4) + 0.5 * math.log(4), abs=1e-3)


@pytest.mark.parametrize("m", [0, 1, 5, 12])
def test_outcome_enumeration(m):
    outs = enumerate_trinomial_outcomes(m)
    assert len(outs) == n_trinomial_outcomes(m) == len(set(map(tuple, outs)))
    assert all(o.m == m for o in outs)
    tables = table_outcome_array(m)
    assert len(tables) == math.comb(m + 3, 3)


@given(st.integers(0, 8), st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4))
@settings(max_examples=40, deadline=None)
def test_masses_sum_to_one(n, w):
    q = np.array(w) / sum(w)
    total = np.exp(multinomial_logpmf_matrix(q, table_outcome_array(n))).sum()
    assert total == pytest.approx(1.0, abs=1e-12)
