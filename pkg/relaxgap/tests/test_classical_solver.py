# pylint: disable=missing-function-docstring, redefined-outer-name, line-too-long
import time

import numpy as np
import pytest

from relaxgap.ClassicalSolver import (
    _PatternSearch,
    boundary_margin,
    constraint_violation,
    evaluate_control,
    refine_control,
    solve_classical,
)
from relaxgap.Config import default_config
from relaxgap.Problem import ClassicalControl


@pytest.fixture(scope="module")
def convex_steer_result(convex_steer):
    return solve_classical(convex_steer, K=4, starts=2, seed=0)


@pytest.mark.dependency()
def test_convex_steer_reaches_the_target(convex_steer_result):
    assert convex_steer_result.best_cost == pytest.approx(0.81, abs=0.01)
    assert convex_steer_result.feasible
    assert convex_steer_result.penalty_at_best <= 1e-6
    assert convex_steer_result.K == 4


@pytest.mark.dependency(depends=["test_convex_steer_reaches_the_target"])
def test_solution_is_reproducible(convex_steer, convex_steer_result):
    again = solve_classical(convex_steer, K=4, starts=2, seed=0)
    assert again.best_cost == convex_steer_result.best_cost
    assert np.array_equal(again.best_control.values, convex_steer_result.best_control.values)


def test_result_document(convex_steer_result):
    document = convex_steer_result.to_dict()
    assert set(document) == {"best_cost", "penalty", "feasible", "K", "starts", "seed", "mode", "control"}
    assert len(document["control"]["time_grid"]) == 5
    assert document["mode"] == "closed"


def test_zero_problem_costs_nothing(zero_problem):
    result = solve_classical(zero_problem, K=3, starts=1, seed=4)
    assert result.best_cost == 0.0
    assert result.feasible


def test_warm_start_runs_as_an_extra_start(convex_steer):
    warm = ClassicalControl.constant(1.0, -0.9)
    result = solve_classical(convex_steer, K=2, starts=1, seed=0, warm_start=warm)
    assert result.starts == 2
    assert result.best_cost <= 0.81 + 1e-3


def test_invalid_sizes(convex_steer):
    with pytest.raises(ValueError):
        solve_classical(convex_steer, K=0, starts=1)
    with pytest.raises(ValueError):
        solve_classical(convex_steer, K=2, starts=0)


def test_boundary_margin(convex_steer):
    assert boundary_margin(convex_steer, "closed") == 0.0
    assert boundary_margin(convex_steer, "open") == default_config().open_margin


def test_evaluate_control_penalises_a_missed_target(convex_steer):
    evaluation = evaluate_control(convex_steer, ClassicalControl.constant(1.0, 0.0))
    assert evaluation.cost == 0.0
    assert evaluation.path_penalty == 0.0
    # 0.8 outside the bounding box plus 0.9 outside the box itself
    assert evaluation.terminal_penalty == pytest.approx(0.64 + 0.81)
    assert evaluation.penalty == evaluation.path_penalty + evaluation.terminal_penalty


def test_evaluate_control_exact_steering(convex_steer):
    evaluation = evaluate_control(convex_steer, ClassicalControl.constant(1.0, -0.9))
    assert evaluation.cost == pytest.approx(0.81)
    assert evaluation.penalty == pytest.approx(0.0, abs=1e-20)


def test_constraint_violation_batches(example1):
    path = np.array([[[0.0], [2.5]], [[1.0], [3.0]]])
    final = np.array([[1.0], [3.0]])
    path_penalty, terminal_penalty = constraint_violation(example1, path, final, 0.0)
    assert path_penalty[0] == 0.0 and terminal_penalty[0] == 0.0
    # each node outside [-2, 2] counts twice: once for the box, once for its bounding box
    assert path_penalty[1] == pytest.approx(2 * 0.25 + 2 * 1.0)
    assert terminal_penalty[1] == pytest.approx(2.0)


def test_refine_control():
    c = ClassicalControl([0.0, 0.5, 1.0], [1.0, -1.0])
    refined = refine_control(c, 4)
    assert refined.values[:, 0].tolist() == [1.0, 1.0, -1.0, -1.0]
    assert np.allclose(refined.time_grid, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_open_mode_keeps_a_margin(convex_steer):
    result = solve_classical(convex_steer, K=2, starts=1, seed=1, mode="open")
    assert result.mode == "open"
    assert result.best_cost == pytest.approx(0.81, abs=0.01)


@pytest.mark.slow
def test_double_well_chatters_towards_zero(example1):
    result = solve_classical(example1, K=20, starts=4, seed=0)
    assert result.best_cost <= 0.05
    assert result.feasible


def test_exchange_moves_keep_the_mean(convex_steer):
    search = _PatternSearch(convex_steer, 3, "closed", default_config())
    values = np.array([[-0.5], [0.2], [0.9]])
    candidates, coordinates = search.moves(values, np.array([0.25]))
    exchanges = candidates[np.array([coordinate is None for coordinate in coordinates])]
    # 3 pairs, two signs each, minus the two that would push 0.9 past 1
    assert len(exchanges) == 4
    assert np.allclose(exchanges.sum(axis=1), values.sum())


def test_search_stops_once_progress_stalls(convex_steer):
    config = default_config()
    search = _PatternSearch(convex_steer, 4, "closed", config)
    initial = np.random.default_rng([0, 0]).uniform(-1.0, 1.0, size=(4, 1))
    result = search.run(initial, 0)
    assert result.polls < config.max_polls
    assert result.objective == pytest.approx(0.81, abs=0.01)


def test_refined_control_integrates_like_the_original(example1):
    c = ClassicalControl.uniform(1.0, [0.3, -0.7, 0.1])
    refined = refine_control(c, 6)
    assert refined.merged().intervals == 3
    assert evaluate_control(example1, refined).cost == pytest.approx(evaluate_control(example1, c).cost, abs=1e-12)


def test_warm_started_refinement_chain_never_gets_worse(example1):
    previous = solve_classical(example1, K=3, starts=2, seed=0)
    for K in (6, 12):
        result = solve_classical(example1, K=K, starts=2, seed=0, warm_start=previous.best_control)
        assert result.best_cost <= previous.best_cost + 1e-9
        previous = result


@pytest.mark.slow
def test_double_well_at_full_resolution(example1):
    result = solve_classical(example1, K=100, starts=16, seed=0)
    assert result.best_cost <= 1e-3
    assert result.feasible


@pytest.mark.slow
def test_convex_steer_at_full_resolution(convex_steer):
    started = time.perf_counter()
    result = solve_classical(convex_steer, K=20, starts=16, seed=0)
    assert time.perf_counter() - started <= 180.0
    assert result.best_cost == pytest.approx(0.81, abs=0.01)
    assert result.feasible
