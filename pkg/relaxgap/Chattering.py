"""
Realising a Young measure by a fast-switching classical control, and
measuring how far the switched trajectory stays from the averaged one.
"""
import logging
from typing import NamedTuple, Optional, Sequence

import numpy as np

from relaxgap.Dynamics import default_dt, integrate_classical, integrate_young, total_cost
from relaxgap.Problem import ClassicalControl, Problem, YoungMeasureControl
from relaxgap.dtos.ChatteringReport import ChatteringReport

chattering_logger = logging.getLogger("relaxgap.chattering")


class ConvergenceStudy(NamedTuple):
    reports: list[ChatteringReport]
    # slope of -log(stateErr) against log(N); about 1 for the averaging construction
    rate: float


def chatter(p: Problem, y: YoungMeasureControl, N: int) -> ClassicalControl:
    """
    Splits every interval of y into N equal frames and each frame into
    consecutive slots, one per atom with positive weight, in atom-list order,
    with lengths proportional to the weights. The control takes atom i's
    value on atom i's slot.
    """
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    breakpoints = [float(y.time_grid[0])]
    values = []
    for k in range(y.intervals):
        start, end = float(y.time_grid[k]), float(y.time_grid[k + 1])
        frame = (end - start) / N
        weights = y.weights[k]
        cumulative = np.cumsum(weights)
        for frame_index in range(N):
            frame_start = start + frame_index * frame
            frame_end = end if frame_index == N - 1 else start + (frame_index + 1) * frame
            for atom, weight in enumerate(weights):
                if weight <= 0:
                    continue
                slot_end = frame_end if cumulative[atom] >= 1.0 else frame_start + frame * cumulative[atom]
                slot_end = min(slot_end, frame_end)
                if slot_end <= breakpoints[-1]:
                    continue
                breakpoints.append(slot_end)
                values.append(y.atoms[atom])
            if breakpoints[-1] < frame_end:
                # rounding left a sliver at the end of the frame; the last atom covers it
                breakpoints[-1] = frame_end
    return ClassicalControl(np.array(breakpoints), np.array(values))


def chattering_error(
    p: Problem, y: YoungMeasureControl, N: int, dt: Optional[float] = None
) -> ChatteringReport:
    """
    Integrates y and its chattered control with the same step and reports
    stateErr = max over nodes of the state deviation and costErr = deviation
    of the running cost at T (the extra coordinate of the lifted system).
    """
    dt = default_dt(p) if dt is None else dt
    control = chatter(p, y, N)
    young = integrate_young(p, y, dt)
    chattered = integrate_classical(p, control, dt)
    state_error = float(np.max(np.linalg.norm(young.states - chattered.states, axis=1)))
    cost_error = abs(young.final_running_cost - chattered.final_running_cost)
    frame_length = float(np.max(np.diff(y.time_grid))) / N
    chattering_logger.debug(f"N={N}: stateErr {state_error:.3e}, costErr {cost_error:.3e}")
    return ChatteringReport(
        control=control,
        N=N,
        dt=dt,
        state_error=state_error,
        cost_error=cost_error,
        frame_length=frame_length,
        young_cost=total_cost(p, young),
        chattered_cost=total_cost(p, chattered),
        horizon=p.T,
    )


def convergence_study(
    p: Problem, y: YoungMeasureControl, Ns: Sequence[int], dt: Optional[float] = None
) -> ConvergenceStudy:
    """Runs chattering_error for every N and fits the rate exponent of stateErr(N) by least squares in log-log."""
    reports = [chattering_error(p, y, N, dt) for N in Ns]
    errors = np.array([r.state_error for r in reports])
    rate = float("nan")
    if len(reports) >= 2 and np.all(errors > 0):
        slope, _ = np.polyfit(np.log(np.asarray(Ns, dtype=float)), np.log(errors), 1)
        rate = -float(slope)
    return ConvergenceStudy(reports, rate)
