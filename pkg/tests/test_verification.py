import pytest

from evacflow.verification import CASES, INVARIANTS, KINDS, coverage_gaps, run_oracles


def test_every_invariant_is_covered():
    assert coverage_gaps() == []
    for case in CASES.values():
        assert case.kind in KINDS
        assert case.certifies and set(case.certifies) <= set(INVARIANTS)


def test_gap_detection():
    partial = {k: v for k, v in CASES.items() if k != "semigroup"}
    assert coverage_gaps(partial) == ["hyperbolic.semigroup"]


@pytest.fixture(scope="module")
def full_report():
    return run_oracles()


def test_full_suite_passes(full_report):
    failed = [r.name for r in full_report.results if not r.passed]
    assert failed == []
    assert full_report.passed
    assert len(full_report.results) == len(CASES)


def test_report_is_deterministic(full_report):
    again = run_oracles(["monotone_pairs", "routing_bounds", "non_crossing"])
    first = {r.name: r for r in full_report.results}
    for r in again.results:
        assert (r.measured, r.passed) == (first[r.name].measured, first[r.name].passed)


def test_seed_is_overridable():
    a = run_oracles(["non_crossing"], seed=0).results[0]
    b = run_oracles(["non_crossing"], seed=7).results[0]
    assert a.passed and b.passed
    assert a.measured != b.measured
