# pylint: disable=missing-function-docstring, redefined-outer-name, line-too-long
import csv

import numpy as np
import pytest

from relaxgap.GapBound import CAVEATS, closure_stability, gap_bound, region_is_empty, shrink, write_gap_csv
from relaxgap.OccupationMeasure import GridSpec
from relaxgap.Problem import region_contains, shrink_region
from relaxgap.relaxation_errors import InnerApproximationEmptyError
from relaxgap.tests.documents import implicit_region

SMALL = GridSpec(10, 20, 11, 4)


@pytest.fixture(scope="module")
def convex_steer_report(convex_steer):
    return gap_bound(convex_steer, [0.2, 0.1, 0.05], SMALL, K=2, starts=2, seed=0)


def test_empty_rung_is_recorded(convex_steer_report):
    rung = convex_steer_report.rung(0.2)
    assert not rung.valid
    assert rung.upper_shrunk is None
    assert rung.gap_bound_estimate is None
    assert "0.2" in rung.error


def test_degenerate_target_rung(convex_steer_report):
    rung = convex_steer_report.rung(0.1)
    assert rung.valid and rung.x0_inside
    assert rung.upper_shrunk == pytest.approx(1.0, abs=0.01)


@pytest.mark.dependency()
def test_gap_ladder_values(convex_steer_report):
    rung = convex_steer_report.rung(0.05)
    assert rung.upper_shrunk == pytest.approx(0.9025, abs=0.01)
    assert rung.feasible
    assert convex_steer_report.lower_full == pytest.approx(0.81, abs=0.05)
    assert rung.gap_bound_estimate == pytest.approx(rung.upper_shrunk - convex_steer_report.lower_full)
    assert rung.gap_bound_estimate > 0


@pytest.mark.dependency(depends=["test_gap_ladder_values"])
def test_upper_bounds_shrink_with_epsilon(convex_steer_report):
    upper = [r.upper_shrunk for r in convex_steer_report.rungs if r.valid]
    assert upper == sorted(upper, reverse=True)


def test_report_document(convex_steer_report):
    document = convex_steer_report.to_dict()
    assert document["epsilon_ladder"] == [0.2, 0.1, 0.05]
    assert [r["epsilon"] for r in document["per_eps"]] == [0.2, 0.1, 0.05]
    assert document["caveats"] == CAVEATS
    assert document["settings"]["K"] == 2
    assert document["stability"] is None


def test_gap_csv(convex_steer_report, tmp_path):
    path = tmp_path / "gap.csv"
    write_gap_csv(convex_steer_report, str(path))
    with open(path, newline="", encoding="utf-8") as file:
        rows = list(csv.reader(file))
    assert rows[0] == ["epsilon", "upper_shrunk", "lower_full", "gap_bound"]
    assert len(rows) == 4
    assert rows[1][1] == "" and rows[1][3] == ""
    assert float(rows[3][1]) == pytest.approx(0.9025, abs=0.01)


def test_x0_outside_the_shrunk_domain(make_problem):
    p = make_problem(x0=[1.95])
    report = gap_bound(p, [0.1], SMALL, K=1, starts=1)
    rung = report.rungs[0]
    assert rung.x0_inside is False
    assert not rung.valid


def test_ladder_must_decrease(convex_steer):
    with pytest.raises(ValueError):
        gap_bound(convex_steer, [0.05, 0.1], SMALL, K=1, starts=1)
    with pytest.raises(ValueError):
        gap_bound(convex_steer, [], SMALL, K=1, starts=1)


def test_shrink(convex_steer):
    inner = shrink(convex_steer, 0.05)
    assert np.allclose(inner.target_eps.lower, [-0.05])
    assert inner.x0_inside
    shrunk = inner.apply(convex_steer)
    assert shrunk.name == "convex_steer_eps0.05"
    assert region_contains(shrunk.target, [0.05])
    assert not region_contains(shrunk.target, [0.06])
    with pytest.raises(InnerApproximationEmptyError):
        shrink(convex_steer, 0.2)
    with pytest.raises(ValueError):
        shrink(convex_steer, 0.0)


def test_implicit_region_emptiness(make_problem):
    p = make_problem(omega=implicit_region("4 - x1^2", [-2.0], [2.0]), target=implicit_region("4 - x1^2", [-2.0], [2.0]))
    assert not region_is_empty(shrink_region(p.omega, 3.9))
    assert region_is_empty(shrink_region(p.omega, 4.5))


def test_closure_stability(convex_steer):
    stability = closure_stability(convex_steer, SMALL, 0.01)
    assert stability["delta"] == 0.01
    assert stability["difference"] == pytest.approx(stability["shrunk"] - stability["closed"])
    assert stability["difference"] >= -1e-7


def test_stability_probe_is_attached(zero_problem):
    report = gap_bound(zero_problem, [0.1], SMALL, K=1, starts=1, probe_stability=True)
    assert report.stability is not None
    assert report.stability["closed"] == pytest.approx(0.0, abs=1e-9)
    assert report.rungs[0].upper_shrunk == 0.0


@pytest.mark.slow
def test_gap_pipeline_at_reference_resolution(convex_steer):
    report = gap_bound(convex_steer, [0.2, 0.1, 0.05], GridSpec(20, 40, 21, 4), K=20, starts=4, seed=0)
    assert report.rung(0.05).gap_bound_estimate <= 0.1
    for rung in report.rungs:
        if rung.valid:
            assert rung.gap_bound_estimate >= -0.05
