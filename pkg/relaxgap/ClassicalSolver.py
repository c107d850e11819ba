"""
Upper bounds on the classical infimum by direct optimisation over K-piece
piecewise-constant controls: seeded multistart, derivative-free pattern
search, quadratic penalty for the state and target constraints.
"""
import itertools
import logging
import math
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Optional

import numpy as np

from relaxgap.Config import Config, default_config
from relaxgap.Dynamics import integrate_batch, integrate_classical, total_cost
from relaxgap.Problem import ClassicalControl, Mode, Problem
from relaxgap.RelaxGapUtilities import worker_count
from relaxgap.dtos.DirectSolveResult import DirectSolveResult
from relaxgap.relaxation_errors import BlowUpError

classical_logger = logging.getLogger("relaxgap.classical")


class ControlEvaluation(NamedTuple):
    cost: float
    # unweighted: path_penalty + terminal_penalty
    penalty: float
    path_penalty: float
    terminal_penalty: float


class _StartResult(NamedTuple):
    objective: float
    penalty: float
    index: int
    values: np.ndarray
    polls: int


def boundary_margin(p: Problem, mode: Mode, config: Optional[Config] = None) -> float:
    """Distance from the boundary demanded of states: open_margin in open mode, 0 in closed mode."""
    config = config or default_config()
    return config.open_margin if mode == "open" else 0.0


def constraint_violation(p: Problem, path: np.ndarray, final: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Squared violations of a batch of trajectories.

    Args:
        path (np.ndarray): States at the nodes, shape (nodes, batch, n).
        final (np.ndarray): Endpoints, shape (batch, n).
    Returns:
        (path_penalty, terminal_penalty): Each of shape (batch,). The path term
            sums Ω's violation over the nodes; the terminal term is the squared
            distance to the target.
    """
    path_penalty = p.omega.squared_violation(path, delta).sum(axis=0)
    terminal_penalty = p.target.squared_violation(final, delta)
    return path_penalty, terminal_penalty


def evaluate_control(
    p: Problem, c: ClassicalControl, mode: Mode = "closed", dt: Optional[float] = None
) -> ControlEvaluation:
    """
    Integrates a control and reports its total cost and the penalty terms
    the direct solver uses.

    Raises:
        (BlowUpError): Propagated from the integrator.
    """
    tr = integrate_classical(p, c, dt)
    path_penalty, terminal_penalty = constraint_violation(
        p, tr.states[:, None, :], tr.final_state[None, :], boundary_margin(p, mode)
    )
    return ControlEvaluation(
        cost=total_cost(p, tr),
        penalty=float(path_penalty[0] + terminal_penalty[0]),
        path_penalty=float(path_penalty[0]),
        terminal_penalty=float(terminal_penalty[0]),
    )


def _evaluate_or_blown(p: Problem, c: ClassicalControl, mode: Mode) -> ControlEvaluation:
    try:
        return evaluate_control(p, c, mode)
    except BlowUpError as err:
        classical_logger.debug(str(err))
        return ControlEvaluation(math.inf, math.inf, math.inf, math.inf)


def refine_control(c: ClassicalControl, K: int) -> ClassicalControl:
    """Resamples a control onto K uniform intervals, taking the value at each new interval's midpoint."""
    T = float(c.time_grid[-1])
    grid = np.linspace(0.0, T, K + 1)
    return ClassicalControl(grid, c.value_at(0.5 * (grid[:-1] + grid[1:])))


class _PatternSearch:
    """
    Coordinate pattern search over U^K with batched polls. A poll tries every
    ±step move of every coordinate, and ±step exchanges between pairs of
    pieces, in one batched integration. If some move improves, the
    combination of all improving coordinate moves is tried too, the better of
    the two is kept and the step doubles (capped at the width of U).
    Otherwise the step is halved. A start ends when the step falls below
    min_step, when the last stall_polls polls gained almost nothing, or at
    max_polls.
    """

    def __init__(self, p: Problem, K: int, mode: Mode, config: Config):
        self.p = p
        self.K = K
        self.config = config
        self.delta = boundary_margin(p, mode, config)
        self.time_grid = np.linspace(0.0, p.T, K + 1)
        self.steps = K * math.ceil(config.optimization_steps / K)
        self.lower = p.controls.lower
        self.upper = p.controls.upper
        # every pair of pieces while that stays small, neighbouring pieces beyond
        if K * (K - 1) // 2 <= config.exchange_pairs:
            self.pairs = list(itertools.combinations(range(K), 2))
        else:
            self.pairs = [(k, k + 1) for k in range(K - 1)]

    def evaluate(self, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Penalised objectives and unweighted penalties for a batch of (K, m) value arrays."""
        lifted = integrate_batch(self.p, self.time_grid, batch, self.steps)
        final = lifted[-1]
        n = self.p.n
        cost = final[:, n] + self.p.terminal_cost(final[:, :n])
        path_penalty, terminal_penalty = constraint_violation(self.p, lifted[:, :, :n], final[:, :n], self.delta)
        penalty = path_penalty + terminal_penalty
        objective = cost + self.config.penalty_weight * penalty
        objective = np.where(np.isfinite(objective), objective, np.inf)
        return objective, np.where(np.isfinite(penalty), penalty, np.inf)

    def moves(self, values: np.ndarray, step: np.ndarray) -> tuple[np.ndarray, list[Optional[tuple[int, int]]]]:
        """
        Single-coordinate ±step moves, then exchanges that add step to one
        piece and take it from another, leaving ∫u unchanged. Exchanges have
        coordinate None and never enter the combined move.
        """
        candidates = []
        coordinates: list[Optional[tuple[int, int]]] = []
        for k in range(self.K):
            for j in range(values.shape[1]):
                if step[j] <= 0:
                    continue
                for sign in (1.0, -1.0):
                    moved = min(max(values[k, j] + sign * step[j], self.lower[j]), self.upper[j])
                    if moved == values[k, j]:
                        continue
                    candidate = values.copy()
                    candidate[k, j] = moved
                    candidates.append(candidate)
                    coordinates.append((k, j))
        for a, b in self.pairs:
            for j in range(values.shape[1]):
                for sign in (1.0, -1.0):
                    up, down = values[a, j] + sign * step[j], values[b, j] - sign * step[j]
                    if step[j] <= 0 or not (self.lower[j] <= min(up, down) and max(up, down) <= self.upper[j]):
                        continue
                    candidate = values.copy()
                    candidate[a, j], candidate[b, j] = up, down
                    candidates.append(candidate)
                    coordinates.append(None)
        return np.array(candidates), coordinates

    def run(self, initial: np.ndarray, index: int) -> _StartResult:
        values = np.array(initial, dtype=float)
        objective, penalty = (float(v[0]) for v in self.evaluate(values[None]))
        width = self.upper - self.lower
        step = width.copy()
        polls = 0
        # objective before each of the last stall_polls polls
        history: deque[float] = deque(maxlen=self.config.stall_polls)
        while np.max(step) >= self.config.min_step and polls < self.config.max_polls:
            if len(history) == history.maxlen and history[0] - objective < self.config.stall_tolerance * (
                1.0 + abs(objective)
            ):
                break
            history.append(objective)
            polls += 1
            candidates, coordinates = self.moves(values, step)
            if len(candidates) == 0:
                step = step / 2.0
                continue
            objectives, penalties = self.evaluate(candidates)
            best = int(np.argmin(objectives))
            if objectives[best] >= objective:
                step = step / 2.0
                continue

            # combine the best improving move of every coordinate
            combined = values.copy()
            chosen: dict[tuple[int, int], float] = {}
            for candidate, coordinate, value in zip(candidates, coordinates, objectives):
                if coordinate is not None and value < objective and value < chosen.get(coordinate, np.inf):
                    chosen[coordinate] = value
                    combined[coordinate] = candidate[coordinate]
            values, objective, penalty = candidates[best], float(objectives[best]), float(penalties[best])
            if len(chosen) > 1:
                combined_objective, combined_penalty = (float(v[0]) for v in self.evaluate(combined[None]))
                if combined_objective < objective:
                    values, objective, penalty = combined, combined_objective, combined_penalty
            step = np.minimum(2.0 * step, width)
        return _StartResult(objective, penalty, index, values, polls)


def solve_classical(
    p: Problem,
    K: Optional[int] = None,
    starts: Optional[int] = None,
    seed: int = 0,
    mode: Mode = "closed",
    warm_start: Optional[ClassicalControl] = None,
    config: Optional[Config] = None,
) -> DirectSolveResult:
    """
    Minimises total cost + ρ·(squared constraint violation) over controls
    with K uniform pieces. Start i draws its initial values from
    default_rng([seed, i]); a warm start, refined to K pieces, runs as an
    extra start. Every start's result is re-evaluated at the default
    integration step; feasible candidates are ranked by cost, the rest by
    penalised objective, ties broken by penalty and then start index.

    Returns:
        (DirectSolveResult): Never raises for infeasibility; a penalty above
            feasibility_tolerance marks the result infeasible.
    """
    config = config or default_config()
    K = config.classical_k if K is None else K
    starts = config.classical_starts if starts is None else starts
    if K < 1 or starts < 1:
        raise ValueError(f"K and starts must be positive, got K={K}, starts={starts}")

    started = time.perf_counter()
    search = _PatternSearch(p, K, mode, config)
    initials = [
        np.random.default_rng([seed, i]).uniform(p.controls.lower, p.controls.upper, size=(K, p.m))
        for i in range(starts)
    ]
    if warm_start is not None:
        initials.append(np.clip(refine_control(warm_start, K).values, p.controls.lower, p.controls.upper))

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(search.run, initials, range(len(initials))))
    for result in results:
        classical_logger.debug(
            f"start {result.index}: objective {result.objective:.6g}, penalty {result.penalty:.3g}, {result.polls} polls"
        )

    # the injected warm start also competes unchanged, so a K-refinement chain can't lose its previous best
    candidates = [(ClassicalControl(search.time_grid, r.values), r.index) for r in results]
    if warm_start is not None:
        candidates.append((ClassicalControl(search.time_grid, initials[-1]), len(initials)))
    evaluations = [_evaluate_or_blown(p, control, mode) for control, _ in candidates]

    def rank(i: int) -> tuple:
        evaluation = evaluations[i]
        if evaluation.penalty <= config.feasibility_tolerance:
            return (0, evaluation.cost, evaluation.penalty, candidates[i][1])
        return (1, evaluation.cost + config.penalty_weight * evaluation.penalty, evaluation.penalty, candidates[i][1])

    winner = min(range(len(candidates)), key=rank)
    control, evaluation = candidates[winner][0], evaluations[winner]
    classical_logger.info(
        f"Direct solve of '{p.name}' (K={K}, {len(initials)} starts, {mode}): cost {evaluation.cost:.6g}, "
        f"penalty {evaluation.penalty:.3g} in {time.perf_counter() - started:.2f}s"
    )
    return DirectSolveResult(
        best_control=control,
        best_cost=evaluation.cost,
        penalty_at_best=evaluation.penalty,
        starts=len(initials),
        seed=seed,
        mode=mode,
        feasible=evaluation.penalty <= config.feasibility_tolerance,
    )
