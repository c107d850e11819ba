"""
Inner approximations of the state domain and target, and the gap-bound
estimate built on them: a direct-method cost on the shrunk sets minus the
occupation LP on the closed sets, for a decreasing ladder of ε.
"""
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from relaxgap.ClassicalSolver import solve_classical
from relaxgap.Config import Config, default_config
from relaxgap.OccupationMeasure import GridSpec, solve_occupation
from relaxgap.Problem import Mode, Problem, RegionSpec, region_contains, shrink_region
from relaxgap.RelaxGapUtilities import write_csv
from relaxgap.dtos.GapReport import GapReport, GapRung
from relaxgap.relaxation_errors import InnerApproximationEmptyError, RelaxGapError

gap_logger = logging.getLogger("relaxgap.gap")

LATTICE_NODES = 41
CAVEATS = [
    "upper_shrunk is a direct-method cost on the shrunk sets: it over-estimates the relaxed infimum there (safe side).",
    "lower_full is a grid-LP estimate of the relaxed infimum on the closed sets; it is not a certified lower bound.",
    "Both numbers depend on the grid and the number of control pieces; refine to gain confidence.",
    "The bound is stated for open Ω and X; each rung records the boundary mode that produced it.",
]


@dataclass(frozen=True, eq=False)
class InnerApproximation:
    epsilon: float
    omega_eps: RegionSpec
    target_eps: RegionSpec
    # x0 ∈ Ω_ε; a rung without it is invalid
    x0_inside: bool

    def apply(self, p: Problem) -> Problem:
        """The problem posed on the shrunk sets."""
        return dataclasses.replace(p, name=f"{p.name}_eps{self.epsilon:g}", omega=self.omega_eps, target=self.target_eps)


def region_is_empty(r: RegionSpec) -> bool:
    """
    No point of a closed lattice of LATTICE_NODES per dimension over the
    bounding box lies in the (closed) region; boxes are also checked directly.
    """
    box = r.bounding_box
    if r.kind == "box":
        lower = np.maximum(r.lower, box.lower)
        upper = np.minimum(r.upper, box.upper)
        return bool(np.any(lower > upper))
    axes = [np.linspace(lo, hi, LATTICE_NODES) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice = np.stack([m.ravel() for m in mesh], axis=-1)
    return not bool(np.any(r.contains(lattice, "closed")))


def shrink(p: Problem, eps: float) -> InnerApproximation:
    """
    Ω_ε = {h >= ε} (or the box moved inward by ε per side) and likewise X_ε.

    Raises:
        (InnerApproximationEmptyError): If either shrunk set is empty.
    """
    if not eps > 0:
        raise ValueError(f"ε must be positive, got {eps}")
    omega_eps = shrink_region(p.omega, eps)
    target_eps = shrink_region(p.target, eps)
    if region_is_empty(omega_eps) or region_is_empty(target_eps):
        raise InnerApproximationEmptyError(eps)
    x0_inside = region_contains(omega_eps, p.x0, "closed")
    if not x0_inside:
        gap_logger.warning(f"x0 lies outside Ω_ε at ε={eps:g}; the rung is invalid")
    return InnerApproximation(eps, omega_eps, target_eps, x0_inside)


def _validate_ladder(ladder: Sequence[float]) -> list[float]:
    ladder = [float(e) for e in ladder]
    if not ladder:
        raise ValueError("The ε ladder must not be empty")
    if any(e <= 0 for e in ladder) or any(a <= b for a, b in zip(ladder, ladder[1:])):
        raise ValueError(f"The ε ladder must be positive and strictly decreasing, got {ladder}")
    return ladder


def closure_stability(
    p: Problem, grid: Optional[GridSpec] = None, delta: Optional[float] = None, closed_objective: Optional[float] = None
) -> dict[str, float]:
    """
    Probes whether the relaxed infimum is stable under a small inward
    perturbation of the boundary: the LP on the closed sets against the LP on
    the δ-shrunk sets.
    """
    delta = default_config().stability_delta if delta is None else delta
    grid = grid or GridSpec.from_config()
    if closed_objective is None:
        closed_objective = solve_occupation(p, grid, "closed", 0.0).objective
    shrunk_objective = solve_occupation(p, grid, "closed", delta).objective
    return {
        "delta": delta,
        "closed": closed_objective,
        "shrunk": shrunk_objective,
        "difference": shrunk_objective - closed_objective,
    }


def gap_bound(
    p: Problem,
    ladder: Optional[Sequence[float]] = None,
    grid: Optional[GridSpec] = None,
    K: Optional[int] = None,
    starts: Optional[int] = None,
    seed: int = 0,
    mode: Mode = "closed",
    probe_stability: bool = False,
    config: Optional[Config] = None,
) -> GapReport:
    """
    For each ε (largest first): upper_shrunk = direct solve on (Ω_ε, X_ε),
    warm-started from the previous rung's control; lower_full = occupation LP
    on the closed sets, solved once, concurrently with the direct-solve chain.
    A failing rung records its error and the ladder carries on.
    """
    config = config or default_config()
    ladder = _validate_ladder(config.gap_ladder if ladder is None else ladder)
    grid = grid or GridSpec.from_config(config)
    K = config.classical_k if K is None else K
    starts = config.classical_starts if starts is None else starts

    def classical_chain() -> list[GapRung]:
        rungs = []
        warm_start = None
        for eps in ladder:
            rung = GapRung(eps, mode)
            try:
                inner = shrink(p, eps)
                rung.x0_inside = inner.x0_inside
                if not inner.x0_inside:
                    rung.error = f"x0 ∉ Ω_ε at ε={eps:g}"
                else:
                    result = solve_classical(inner.apply(p), K, starts, seed, mode, warm_start, config)
                    warm_start = result.best_control
                    rung.upper_shrunk = result.best_cost
                    rung.penalty = result.penalty_at_best
                    rung.feasible = result.feasible
            except RelaxGapError as err:
                rung.error = str(err)
            if rung.error:
                gap_logger.warning(f"Rung ε={eps:g} failed: {rung.error}")
            else:
                gap_logger.debug(f"Rung ε={eps:g}: upper {rung.upper_shrunk:.6g}")
            rungs.append(rung)
        return rungs

    with ThreadPoolExecutor(max_workers=2) as pool:
        lower_future = pool.submit(solve_occupation, p, grid, "closed", 0.0)
        chain_future = pool.submit(classical_chain)
        lower_full = lower_future.result().objective
        rungs = chain_future.result()

    for rung in rungs:
        rung.lower_full = lower_full
    stability = closure_stability(p, grid, config.stability_delta, lower_full) if probe_stability else None
    gap_logger.info(
        f"Gap bound for '{p.name}': lower {lower_full:.6g}; "
        + ", ".join(
            f"ε={r.epsilon:g}: {r.gap_bound_estimate:.4g}" if r.valid else f"ε={r.epsilon:g}: failed" for r in rungs
        )
    )
    settings = {"grid": grid.to_dict(), "K": K, "starts": starts, "seed": seed, "mode": mode}
    return GapReport(ladder, rungs, lower_full, list(CAVEATS), settings, stability)


def write_gap_csv(report: GapReport, path: str) -> None:
    """Columns epsilon, upper_shrunk, lower_full, gap_bound; failed rungs leave the values empty."""
    rows = (
        [
            rung.epsilon,
            "" if rung.upper_shrunk is None else rung.upper_shrunk,
            "" if rung.lower_full is None else rung.lower_full,
            "" if rung.gap_bound_estimate is None else rung.gap_bound_estimate,
        ]
        for rung in report.rungs
    )
    write_csv(path, ["epsilon", "upper_shrunk", "lower_full", "gap_bound"], rows)
