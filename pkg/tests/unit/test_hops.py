import pytest

from app.frontend.hops import (
    BoundCheck,
    HopReport,
    complete_insert_bound,
    deep_insert_bound,
    holon_total_check,
    hop_report,
    run_bound_suite,
    total_holons_complete,
    wildcard_message_bound,
)
from app.holarchy.inspect import holon_count
from app.holarchy.layouts import complete_layout, deep_layout, levels_needed
from app.holarchy.state import ALG_ID, HolonKind
from app.runtime.messages import HopTrace


def test_levels_needed():
    assert levels_needed(2, 2) == 1
    assert levels_needed(2, 16) == 4
    assert levels_needed(2, 17) == 5
    assert levels_needed(3, 16) == 3
    assert levels_needed(4, 256) == 4


def test_insert_bounds():
    assert complete_insert_bound(2, 16) == 11
    assert complete_insert_bound(4, 64) == 15
    assert deep_insert_bound(16) == 19


def test_holon_totals():
    assert total_holons_complete(n_alg=4, n_data=2, b_alg=2, b_data=2) == 8 + 3 + 7
    assert holon_total_check(measured=18, n_alg=4, n_data=2).passed
    assert not holon_total_check(measured=19, n_alg=4, n_data=2).passed


def test_wildcard_message_bound():
    # submission, ASK + reply for 10 holons and both roots, FETCH + DATA for 4 models
    assert wildcard_message_bound(10, 4, 1) == 1 + 24 + 8


def test_report_flags_exceeded_checks():
    report = HopReport(checks=[BoundCheck("q1", "insert", 5, 7), BoundCheck("q2", "insert", 9, 7)])
    assert not report.ok
    assert "EXCEEDED" in report.render()
    assert report.render().strip().endswith("2 check(s), 1 exceeded")


def test_missing_trace_counts_as_zero():
    report = hop_report({}, tests={"q": (4, 1, 1)})
    assert report.ok
    assert report.checks[0].measured == 0
    assert len(HopTrace("q")) == 0


def test_complete_layout_shape(system):
    root = system.runtime.get(ALG_ID)
    layout = complete_layout(root, 2, 8)
    assert layout.depth == 3
    assert holon_count(system.holons(), HolonKind.ALGORITHM) == 8 + 7
    assert system.validate().ok


def test_deep_layout_shape(system):
    root = system.runtime.get(ALG_ID)
    layout = deep_layout(root, 5)
    assert layout.depth == 5
    assert holon_count(system.holons(), HolonKind.ALGORITHM) == 5 + 4
    assert system.validate().ok


def test_layouts_reject_degenerate_sizes(system):
    root = system.runtime.get(ALG_ID)
    with pytest.raises(ValueError):
        complete_layout(root, 1, 8)
    with pytest.raises(ValueError):
        deep_layout(root, 1)


def test_measured_counts_stay_within_bounds(config):
    report = run_bound_suite(config, branchings=(2, 3), sizes=(4, 16), deep_sizes=(4, 8))
    assert len(report.checks) == 2 * 2 + 2 + 2
    assert report.ok, report.render()
    assert any(check.label.startswith("holon total 5x3") for check in report.checks)


def test_complete_layouts_of_256_leaves_stay_within_bounds(config):
    report = run_bound_suite(config, branchings=(2, 3, 4), sizes=(256,), deep_sizes=())
    inserts = [check for check in report.checks if "CFP" in check.label]
    assert [check.bound for check in inserts] == [2 * 8 + 3, 3 * 6 + 3, 4 * 4 + 3]
    assert report.ok, report.render()
