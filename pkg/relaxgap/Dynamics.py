"""
Fixed-step integration of the lifted system (state, accumulated running cost)
under classical or Young-measure controls, plus the lift of a problem into
its null-Lagrangian form.
"""
import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from relaxgap.Config import default_config
from relaxgap.ExprLang import ZERO, BinOp, Var
from relaxgap.Problem import BoxSpec, ClassicalControl, Problem, RegionSpec, YoungMeasureControl
from relaxgap.RelaxGapUtilities import write_csv
from relaxgap.relaxation_errors import BlowUpError, InputError

dynamics_logger = logging.getLogger("relaxgap.dynamics")

STEP_TOLERANCE = 1e-9
DEFAULT_COST_BOUND = 1.0e3

# (t, lifted state batch, control interval) -> lifted derivative batch
LiftedRate = Callable[[float, np.ndarray, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    An integral curve sampled on a uniform time grid. running_cost is the
    lifted coordinate: the integral of L up to each node.
    """

    time_grid: np.ndarray
    states: np.ndarray
    running_cost: np.ndarray
    in_omega_open: np.ndarray
    in_omega_closed: np.ndarray

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_running_cost(self) -> float:
        return float(self.running_cost[-1])

    @property
    def lifted_states(self) -> np.ndarray:
        return np.concatenate([self.states, self.running_cost[:, None]], axis=1)


class _Substep(NamedTuple):
    t: float
    h: float
    interval: int
    # index of the grid node reached at the end of this substep, or -1
    node: int


class Schedule(NamedTuple):
    """The uniform node grid and the RK4 substeps between nodes, split at control switches."""

    node_times: np.ndarray
    substeps: list[_Substep]


def step_count(span: float, dt: float) -> int:
    """Number of steps of size dt across span; span/dt must be an integer within 1e-9."""
    if not dt > 0:
        raise InputError(f"The step size must be positive, got dt={dt}")
    ratio = span / dt
    steps = int(round(ratio))
    if steps < 1 or abs(ratio - steps) > STEP_TOLERANCE * max(1.0, steps):
        raise InputError(f"dt={dt} does not divide the horizon {span} into a whole number of steps")
    return steps


def build_schedule(time_grid: np.ndarray, dt: float, t0: float, t_end: float) -> Schedule:
    """
    Lays out the integration nodes t0, t0+dt, ..., t_end and the substeps
    between them. A step that contains a switch of the piecewise-constant
    control is split there, so no substep straddles a switch.
    """
    steps = step_count(t_end - t0, dt)
    node_times = t0 + dt * np.arange(steps + 1)
    node_times[-1] = t_end
    switches = np.asarray(time_grid, dtype=float)[1:-1]
    intervals = len(time_grid) - 1

    substeps: list[_Substep] = []
    for k in range(steps):
        a, b = node_times[k], node_times[k + 1]
        tolerance = STEP_TOLERANCE * max(1.0, abs(b))
        inside = switches[(switches > a + tolerance) & (switches < b - tolerance)]
        bounds = [a, *inside.tolist(), b]
        for j in range(len(bounds) - 1):
            midpoint = 0.5 * (bounds[j] + bounds[j + 1])
            interval = int(np.clip(np.searchsorted(time_grid, midpoint, side="right") - 1, 0, intervals - 1))
            node = k + 1 if j == len(bounds) - 2 else -1
            substeps.append(_Substep(bounds[j], bounds[j + 1] - bounds[j], interval, node))
    return Schedule(node_times, substeps)


def _rk4(rate: LiftedRate, schedule: Schedule, y0: np.ndarray, raise_on_blowup: bool = True) -> np.ndarray:
    """
    Classical fourth-order Runge-Kutta over the schedule.

    Args:
        y0 (np.ndarray): Lifted initial states, shape (batch, n+1).
    Returns:
        (np.ndarray): States at every node, shape (nodes, batch, n+1).
    """
    states = np.empty((len(schedule.node_times),) + y0.shape)
    states[0] = y0
    y = np.array(y0, dtype=float)
    for t, h, interval, node in schedule.substeps:
        k1 = rate(t, y, interval)
        k2 = rate(t + 0.5 * h, y + 0.5 * h * k1, interval)
        k3 = rate(t + 0.5 * h, y + 0.5 * h * k2, interval)
        k4 = rate(t + h, y + h * k3, interval)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if node >= 0:
            states[node] = y
            if raise_on_blowup and not np.all(np.isfinite(y)):
                raise BlowUpError(float(schedule.node_times[node]))
    return states


def classical_rate(p: Problem, values: np.ndarray) -> LiftedRate:
    """Lifted right-hand side for a batch of piecewise-constant controls, values shape (batch, K, m)."""

    def rate(t: float, y: np.ndarray, interval: int) -> np.ndarray:
        return p.lifted(t, y[..., : p.n], values[:, interval, :])

    return rate


def young_rate(p: Problem, y: YoungMeasureControl) -> LiftedRate:
    """Lifted right-hand side averaged over the atoms of the current interval."""
    supports = [np.flatnonzero(row > 0) for row in y.weights]

    def rate(t: float, state: np.ndarray, interval: int) -> np.ndarray:
        active = supports[interval]
        atoms = y.atoms[active]
        weights = y.weights[interval, active]
        values = p.lifted(t, state[:, None, : p.n], atoms[None, :, :])
        return np.einsum("a,bak->bk", weights, values)

    return rate


def default_dt(p: Problem) -> float:
    return p.T / default_config().default_steps


def _initial_lifted(p: Problem, x0: Optional[Sequence[float]], cost0: float) -> np.ndarray:
    start = p.x0 if x0 is None else np.asarray(x0, dtype=float)
    return np.concatenate([start, [cost0]])[None, :]


def _trajectory(p: Problem, node_times: np.ndarray, lifted: np.ndarray) -> Trajectory:
    states = lifted[:, : p.n]
    return Trajectory(
        time_grid=node_times,
        states=states,
        running_cost=lifted[:, p.n],
        in_omega_open=np.asarray(p.omega.contains(states, "open")),
        in_omega_closed=np.asarray(p.omega.contains(states, "closed")),
    )


def integrate_classical(
    p: Problem,
    c: ClassicalControl,
    dt: Optional[float] = None,
    t0: float = 0.0,
    x0: Optional[Sequence[float]] = None,
    cost0: float = 0.0,
) -> Trajectory:
    """
    Integrates γ' = f(t, γ, u(t)) together with the running cost ∫L on
    [t0, T], recording Ω membership at every node without enforcing it.

    Args:
        dt (float, optional): Step size; defaults to T / default_steps.
        t0, x0, cost0: Restart point, for integrating on a tail of the horizon.
    Raises:
        (BlowUpError): If the state becomes nonfinite, with the time.
        (InputError): If dt doesn't divide T - t0.
    """
    dt = default_dt(p) if dt is None else dt
    # no split at a breakpoint where the value doesn't change
    c = c.merged()
    schedule = build_schedule(c.time_grid, dt, t0, p.T)
    lifted = _rk4(classical_rate(p, c.values[None, :, :]), schedule, _initial_lifted(p, x0, cost0))
    return _trajectory(p, schedule.node_times, lifted[:, 0, :])


def integrate_young(
    p: Problem,
    y: YoungMeasureControl,
    dt: Optional[float] = None,
    t0: float = 0.0,
    x0: Optional[Sequence[float]] = None,
    cost0: float = 0.0,
) -> Trajectory:
    """
    Integrates the ν-averaged field Σ w_i f(t, x, u_i) and running cost
    Σ w_i L(t, x, u_i). Same contract as integrate_classical.
    """
    dt = default_dt(p) if dt is None else dt
    schedule = build_schedule(y.time_grid, dt, t0, p.T)
    lifted = _rk4(young_rate(p, y), schedule, _initial_lifted(p, x0, cost0))
    return _trajectory(p, schedule.node_times, lifted[:, 0, :])


def integrate_control(p: Problem, control, dt: Optional[float] = None) -> Trajectory:
    """Dispatches on the control type."""
    if isinstance(control, YoungMeasureControl):
        return integrate_young(p, control, dt)
    return integrate_classical(p, control, dt)


def integrate_batch(p: Problem, time_grid: np.ndarray, values: np.ndarray, steps: int) -> np.ndarray:
    """
    Integrates many piecewise-constant controls sharing one time grid. Blow-ups
    are left as nonfinite entries rather than raised.

    Args:
        values (np.ndarray): Control values, shape (batch, K, m).
        steps (int): Total number of uniform steps over [0, T].
    Returns:
        (np.ndarray): Lifted states at every node, shape (steps+1, batch, n+1).
    """
    schedule = build_schedule(time_grid, p.T / steps, 0.0, p.T)
    y0 = np.tile(_initial_lifted(p, None, 0.0), (values.shape[0], 1))
    return _rk4(classical_rate(p, values), schedule, y0, raise_on_blowup=False)


def total_cost(p: Problem, tr: Trajectory) -> float:
    """Running cost at T plus g(γ(T))."""
    return tr.final_running_cost + float(p.terminal_cost(tr.final_state))


def lifted_field(p: Problem) -> Callable[[float, np.ndarray, np.ndarray], np.ndarray]:
    """
    The parametrisation u ↦ (f(t,x,u), L(t,x,u)) of the lifted inclusion, as a
    vectorised function returning a vector of length n+1 (last axis).
    """

    def field(t, x, u) -> np.ndarray:
        return p.lifted(t, np.asarray(x, dtype=float), np.asarray(u, dtype=float))

    return field


def _extend_box(box: BoxSpec, bound: float) -> BoxSpec:
    return BoxSpec(np.append(box.lower, -bound), np.append(box.upper, bound))


def _extend_region(region: RegionSpec, bound: float) -> RegionSpec:
    bounding_box = _extend_box(region.bounding_box, bound)
    if region.kind == "implicit":
        return RegionSpec("implicit", bounding_box, h=region.h)
    return RegionSpec("box", bounding_box, lower=np.append(region.lower, -bound), upper=np.append(region.upper, bound))


def lift_problem(p: Problem, cost_bound: float = DEFAULT_COST_BOUND) -> Problem:
    """
    The equivalent problem with the running cost as an extra state: dynamics
    (f, L), zero Lagrangian, terminal cost x_{n+1} + g, and the domain and
    target extended by [-cost_bound, cost_bound] in the new coordinate.
    """
    cost_variable = Var(f"x{p.n + 1}")
    return Problem(
        name=f"{p.name}_lifted",
        n=p.n + 1,
        m=p.m,
        T=p.T,
        x0=np.append(p.x0, 0.0),
        f=tuple(p.f) + (p.L,),
        L=ZERO,
        g=BinOp("+", cost_variable, p.g),
        omega=_extend_region(p.omega, cost_bound),
        target=_extend_region(p.target, cost_bound),
        controls=p.controls,
    )


def write_trajectory_csv(p: Problem, tr: Trajectory, path: str) -> None:
    """Columns: t, x1..xn, running_cost, in_omega_open, in_omega_closed."""
    header = ["t", *p.state_names, "running_cost", "in_omega_open", "in_omega_closed"]
    rows = (
        [t, *state, cost, int(is_open), int(is_closed)]
        for t, state, cost, is_open, is_closed in zip(
            tr.time_grid, tr.states, tr.running_cost, tr.in_omega_open, tr.in_omega_closed
        )
    )
    write_csv(path, header, rows)
    dynamics_logger.debug(f"Wrote {len(tr.time_grid)} trajectory rows to {path}")
