import numpy as np
import pytest

import brute
from nogold import geometry as geo
from nogold.bounds import BoundConfig, buehler_lower_diff
from nogold.errors import ResourceError
from nogold.verification import (
    completion_residual,
    exact_coverage_diff,
    exact_coverage_ratio,
    lemma_suite,
    mc_coverage_restricted,
    simplex_lattice,
)


def test_simplex_lattice():
    lat = simplex_lattice(21, 4)
    assert len(lat) == 1771 and np.all(lat.sum(axis=1) == 20)
    assert len(simplex_lattice(3, 3)) == 6


def test_single_observation_coverage_by_hand():
    # bounds are -1, -0.95 and -0.9 for (k01, k10) = (0,1), (0,0), (1,0);
    # every q with q01 - q10 >= -0.9 is covered surely
    res = exact_coverage_diff(1, 0.95)
    assert res.min_coverage == pytest.approx(1.0)
    res = exact_coverage_diff(1, 0.8)
    assert res.min_coverage >= 0.8


def test_exact_coverage_against_enumeration():
    config = BoundConfig(beta=0.8)
    bound = lambda k: buehler_lower_diff((k[1], k[2], k[0] + k[3]), config).value
    res = exact_coverage_diff(3, 0.8, 11, config)
    q = res.argmin
    direct = brute.coverage_at(3, q, bound, round((q[1] - q[2]) * 10) / 10)
    assert res.min_coverage == pytest.approx(direct, abs=1e-12)
    assert res.min_coverage >= 0.8


def test_exact_coverage_budget():
    with pytest.raises(ResourceError):
        exact_coverage_diff(100, 0.9)


@pytest.mark.parametrize("direct", [False, True])
def test_ratio_coverage(direct):
    res = exact_coverage_ratio(5, 0.8, 21, direct=direct)
    assert res.min_coverage >= 0.8


def test_monte_carlo_is_seeded():
    a = mc_coverage_restricted(10, 0.9, 50, seed=3)
    b = mc_coverage_restricted(10, 0.9, 50, seed=3)
    assert a == b
    assert a.se_gain == pytest.approx(np.sqrt(a.coverage_gain * (1 - a.coverage_gain) / 50))


def test_completion_residual_zero_on_model_points():
    q, pt, _ = geo.oracle_sample_arrays(0, 200, restricted=True)
    res, sp1, sp2 = completion_residual(q, pt.pr, pt.se1, pt.se2, restricted=True)
    assert np.max(res) < 1e-12
    assert np.allclose(sp1, pt.sp1) and np.allclose(sp2, pt.sp2)


def test_lemma_suite_passes():
    report = lemma_suite(11, 2000)
    assert report.passed, [c for c in report.checks if not c.passed]
    names = {c.name for c in report.checks}
    assert {"reverse/A", "reverse/C_le", "equivalence/A vs A_alt", "construct_theta round trip"} <= names


def test_zero_samples_is_a_skipped_pass():
    report = lemma_suite(0, 0)
    assert report.passed and report.skipped


def _negated_gain_range(q, pt):
    q00, q01, q10, q11 = geo._cells(q)
    pr, sp1, se1, sp2, se2 = pt
    ok = geo._unit(pr, sp1, se1, sp2, se2)
    ok &= geo._eq(pr * (se2 - se1), (1 - pr) * (sp2 - sp1) + q01 - q10)
    ok &= geo._eq(pr * (se1 + se2 - 1), (1 - pr) * (sp1 + sp2 - 1) + q11 - q00)
    ok &= ~geo._gain_range(q, pr, se1, se2) & geo._sum_range(q, pr, se1, se2)
    return geo._out(ok)


def test_tampered_predicate_is_caught():
    report = lemma_suite(5, 2000, predicates={"in_A_alt": _negated_gain_range})
    assert not report.passed
    failed = [c for c in report.checks if not c.passed]
    assert any(c.name == "equivalence/A vs A_alt" for c in failed)
    assert all(c.counterexample is not None for c in failed)


def test_too_large_set_is_caught_by_reverse_attainability():
    # the unrestricted gain set passes forward soundness under Sp1 <= Sp2 but
    # contains points no restricted theta reaches
    report = lemma_suite(5, 2000, predicates={"in_C_le": geo.in_C})
    by_name = {c.name: c for c in report.checks}
    assert by_name["forward/restricted/C_le"].passed
    assert not by_name["reverse/C_le"].passed
    assert by_name["reverse/C_le"].counterexample is not None
