# pylint: disable=missing-function-docstring, redefined-outer-name, line-too-long
import csv

import numpy as np
import pytest

from relaxgap.ClassicalSolver import solve_classical
from relaxgap.Corpus import list_examples
from relaxgap.Dynamics import integrate_classical, integrate_young
from relaxgap.OccupationMeasure import (
    NORMALIZATION_ROW,
    GridSpec,
    assemble_lp,
    control_nodes,
    export_lp,
    liouville_residual,
    solve_lp,
    solve_occupation,
    trajectory_measure,
    write_measure_csv,
)
from relaxgap.Problem import ClassicalControl, YoungMeasureControl
from relaxgap.relaxation_errors import InfeasibleLPError, InnerApproximationEmptyError
from relaxgap.tests.documents import box_region

REFERENCE = GridSpec(20, 40, 21, 4)
SMALL = GridSpec(10, 20, 11, 4)


@pytest.fixture(scope="module")
def example1_lp(example1):
    return assemble_lp(example1, REFERENCE)


@pytest.fixture(scope="module")
def example1_measure(example1_lp):
    return solve_lp(example1_lp)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(1, 40, 21, 4)
    with pytest.raises(ValueError):
        GridSpec(20, 40, 21, 0)
    assert REFERENCE.refined() == GridSpec(40, 80, 41, 4)


def test_control_nodes_include_the_endpoints(example1):
    nodes = control_nodes(example1, REFERENCE)
    assert nodes.shape == (21, 1)
    assert nodes[0, 0] == -1.0 and nodes[-1, 0] == 1.0


def test_lp_dimensions(example1_lp):
    assert example1_lp.mu_count == 20 * 40 * 21
    assert example1_lp.terminal_count == 40
    assert example1_lp.A.shape == (16, 20 * 40 * 21 + 40)
    assert example1_lp.row_labels[0] == "1"
    assert example1_lp.row_labels[1] == "t"
    assert example1_lp.row_labels[-1] == NORMALIZATION_ROW


def test_constant_test_function_row(example1_lp):
    row = example1_lp.A.getrow(0).toarray().ravel()
    assert np.all(row[: example1_lp.mu_count] == 0.0)
    assert np.all(row[example1_lp.mu_count :] == -1.0)
    assert example1_lp.b[0] == -1.0


def test_time_test_function_row(example1_lp):
    row = example1_lp.A.getrow(1).toarray().ravel()
    mu_part = row[: example1_lp.mu_count]
    assert np.allclose(mu_part, mu_part[0]) and mu_part[0] > 0
    assert np.allclose(row[example1_lp.mu_count :], -mu_part[0])
    assert example1_lp.b[1] == 0.0


@pytest.mark.dependency()
def test_example1_relaxed_value(example1_measure):
    assert -0.05 <= example1_measure.objective <= 0.05


@pytest.mark.dependency(depends=["test_example1_relaxed_value"])
def test_measure_invariants(example1, example1_measure):
    assert np.all(example1_measure.mu_weights >= 0)
    assert np.all(example1_measure.boundary_weights >= 0)
    assert example1_measure.boundary_weights.sum() == pytest.approx(1.0, abs=1e-8)
    assert example1_measure.total_mass == pytest.approx(example1.T, abs=1e-6)


def test_convex_steer_relaxed_value(convex_steer):
    assert solve_occupation(convex_steer, REFERENCE).objective == pytest.approx(0.81, abs=0.05)


def test_zero_problem_relaxed_value(zero_problem):
    assert solve_occupation(zero_problem, SMALL).objective == pytest.approx(0.0, abs=1e-9)


def test_cells_stay_inside_the_domain(tangential_disk):
    grid = GridSpec(10, 16, 3, 2)
    lp = assemble_lp(tangential_disk, grid)
    x = lp.mu_cells[:, 1:3]
    assert np.all(1.0 - x[:, 0] ** 2 - x[:, 1] ** 2 >= 0)
    assert np.all(1.0 - lp.terminal_cells[:, 0] ** 2 - lp.terminal_cells[:, 1] ** 2 >= 0)
    assert solve_lp(lp).objective == pytest.approx(0.0, abs=1e-9)


def test_objective_grows_with_test_degree(convex_steer):
    low = solve_occupation(convex_steer, GridSpec(10, 20, 11, 2)).objective
    high = solve_occupation(convex_steer, GridSpec(10, 20, 11, 4)).objective
    assert low <= high + 1e-7


def test_objective_grows_with_shrinking(convex_steer):
    full = solve_occupation(convex_steer, SMALL, eps=0.0).objective
    shrunk = solve_occupation(convex_steer, SMALL, eps=0.02).objective
    assert full <= shrunk + 1e-7


def test_empty_inner_approximation(convex_steer):
    with pytest.raises(InnerApproximationEmptyError):
        assemble_lp(convex_steer, SMALL, eps=0.2)


def test_unreachable_target_is_infeasible(make_problem):
    p = make_problem(f=["0*u1"], target=box_region([1.5], [2.0]))
    with pytest.raises(InfeasibleLPError):
        solve_occupation(p, SMALL)


def test_trajectory_measure_has_mass_T(example1):
    c = ClassicalControl.constant(1.0, 1.0)
    tr = integrate_classical(example1, c, dt=1e-3)
    cells, deposit, terminal = trajectory_measure(example1, tr, c, REFERENCE)
    assert deposit.sum() == pytest.approx(1.0)
    assert cells.shape == (1000, 3)
    assert terminal.shape == (1,)


def test_residual_of_constant_control(example1):
    c = ClassicalControl.constant(1.0, 1.0)
    tr = integrate_classical(example1, c, dt=1e-3)
    assert liouville_residual(example1, tr, c, GridSpec(20, 40, 21, 3)) <= 5e-2


def test_residual_of_young_measure(example1):
    y = YoungMeasureControl([0.0, 1.0], [[1.0], [-1.0]], [[0.5, 0.5]])
    tr = integrate_young(example1, y, dt=1e-3)
    assert liouville_residual(example1, tr, y, GridSpec(20, 40, 21, 3)) <= 5e-2


def test_residual_shrinks_for_resting_state(zero_problem):
    c = ClassicalControl.constant(1.0, 0.0)
    tr = integrate_classical(zero_problem, c, dt=1e-2)
    coarse = liouville_residual(zero_problem, tr, c, GridSpec(20, 40, 21, 3))
    fine = liouville_residual(zero_problem, tr, c, GridSpec(40, 80, 21, 3))
    assert fine < coarse


def test_residual_refinement(terminal_linear):
    c = ClassicalControl.constant(1.0, -1.0)
    residuals = []
    for nt, nx, dt in [(20, 40, 1e-2), (40, 80, 5e-3), (80, 160, 2.5e-3)]:
        tr = integrate_classical(terminal_linear, c, dt=dt)
        residuals.append(liouville_residual(terminal_linear, tr, c, GridSpec(nt, nx, 21, 3)))
    for coarse, fine in zip(residuals, residuals[1:]):
        assert fine <= 1.1 * coarse
    assert residuals[2] < residuals[0]
    assert residuals[2] <= 0.01


def test_export_lp(zero_problem, tmp_path):
    grid = GridSpec(4, 4, 3, 2)
    lp = assemble_lp(zero_problem, grid)
    path = tmp_path / "lp.txt"
    export_lp(lp, str(path))
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
    assert lines[0] == f"rows {lp.A.shape[0]}"
    assert lines[1] == f"cols {lp.A.shape[1]}"
    assert lines[2] == f"entries {lp.A.nnz}"
    rhs_at = 3 + lp.A.nnz
    assert lines[rhs_at] == "rhs"
    assert lines[rhs_at + lp.A.shape[0] + 1] == "objective"
    assert len(lines) == rhs_at + lp.A.shape[0] + 2 + lp.A.shape[1]
    i, j, value = lines[3].split()
    assert lp.A[int(i), int(j)] == float(value)


def test_measure_csv(example1, example1_measure, tmp_path):
    path = tmp_path / "measure.csv"
    write_measure_csv(example1, example1_measure, str(path))
    with open(path, newline="", encoding="utf-8") as file:
        rows = list(csv.reader(file))
    assert rows[0] == ["t_center", "x1_center", "u1_center", "weight"]
    assert sum(float(row[-1]) for row in rows[1:]) == pytest.approx(example1_measure.total_mass)


@pytest.mark.slow
def test_relaxed_value_is_below_classical_cost():
    for example in list_examples(include_slots=False):
        p = example.load()
        relaxed = solve_occupation(p, example.grid).objective
        classical = solve_classical(p, K=min(example.classical_k, 20), starts=4, seed=0)
        assert relaxed <= classical.best_cost + 0.05, example.name


@pytest.mark.slow
def test_ordering_margin_shrinks_under_refinement(convex_steer, terminal_linear):
    for p, K in ((convex_steer, 20), (terminal_linear, 20)):
        relaxed = solve_occupation(p, REFERENCE.refined()).objective
        classical = solve_classical(p, K=K, starts=4, seed=0)
        assert relaxed <= classical.best_cost + 0.02, p.name
