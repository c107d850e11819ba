"""
Grid discretisation of the occupation-measure relaxation: nonnegative weights
on (t, x, u) cells and on terminal cells of the target, tied together by the
weak Liouville identity tested against monomials, solved with HiGHS.

The discretised objective is an estimate of the relaxed infimum, not a
certified bound; refining the grid is the way to gain confidence in it.
"""
import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from relaxgap.Config import default_config
from relaxgap.Dynamics import Trajectory
from relaxgap.Problem import BoxSpec, Mode, Problem, RegionSpec, YoungMeasureControl, shrink_region
from relaxgap.RelaxGapUtilities import worker_count, write_csv
from relaxgap.relaxation_errors import (
    InfeasibleLPError,
    InnerApproximationEmptyError,
    SolverFailureError,
    UnboundedLPError,
)

occupation_logger = logging.getLogger("relaxgap.occupation")

NORMALIZATION_ROW = "normalization"


@dataclass(frozen=True)
class GridSpec:
    """
    Cell counts over [0,T] (nt) and per state dimension over the bounding box
    of Ω (nx), control nodes per control dimension over U (nu, endpoints
    included), and the maximum total degree of the test monomials.
    """

    nt: int
    nx: int
    nu: int
    degree: int

    def __post_init__(self):
        if min(self.nt, self.nx, self.nu) < 2:
            raise ValueError(f"Grid counts must be at least 2, got nt={self.nt}, nx={self.nx}, nu={self.nu}")
        if self.degree < 1:
            raise ValueError(f"The test degree must be at least 1, got {self.degree}")

    @classmethod
    def from_config(cls, config=None) -> "GridSpec":
        config = config or default_config()
        return cls(config.grid_nt, config.grid_nx, config.grid_nu, config.test_degree)

    def refined(self) -> "GridSpec":
        """Doubles every cell count (control nodes double their intervals)."""
        return GridSpec(2 * self.nt, 2 * self.nx, 2 * self.nu - 1, self.degree)

    def to_dict(self) -> dict:
        return {"nt": self.nt, "nx": self.nx, "nu": self.nu, "degree": self.degree}


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """
    minimize c·w subject to A w = b, w >= 0, where w stacks the occupation
    weights (one per row of mu_cells) and the terminal weights (one per row
    of terminal_cells). Rows are scaled by their largest coefficient.
    """

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    row_labels: list[str]
    mu_cells: np.ndarray
    terminal_cells: np.ndarray
    grid: GridSpec
    mode: Mode
    epsilon: float

    @property
    def mu_count(self) -> int:
        return len(self.mu_cells)

    @property
    def terminal_count(self) -> int:
        return len(self.terminal_cells)


@dataclass(frozen=True, eq=False)
class DiscreteOccupationMeasure:
    """
    An optimal point of the LP: mu_weights (time·mass, one per occupation
    cell) and boundary_weights (a probability vector over terminal cells).
    """

    mu_weights: np.ndarray
    mu_cells: np.ndarray
    boundary_weights: np.ndarray
    boundary_cells: np.ndarray
    objective: float
    grid: GridSpec
    mode: Mode
    epsilon: float

    @property
    def total_mass(self) -> float:
        return float(self.mu_weights.sum())


class _Basis:
    """
    Monomials τ^a s^α with a + |α| <= degree in the scaled coordinates
    τ = t/T and s = (x - c)/r, c and r the centre and half-width of Ω's
    bounding box. Scaling keeps the row coefficients of comparable size.
    """

    def __init__(self, p: Problem, degree: int):
        self.T = p.T
        self.center = p.omega.bounding_box.center
        self.half_width = p.omega.bounding_box.half_width
        self.degree = degree
        exponents = [e for e in itertools.product(range(degree + 1), repeat=p.n + 1) if sum(e) <= degree]
        self.exponents: list[tuple[int, ...]] = sorted(exponents, key=lambda e: (sum(e), tuple(-k for k in e)))
        self.state_names = p.state_names

    def label(self, exponent: tuple[int, ...]) -> str:
        names = ["t", *self.state_names]
        factors = [name if k == 1 else f"{name}^{k}" for name, k in zip(names, exponent) if k > 0]
        return "*".join(factors) or "1"

    def powers(self, t: np.ndarray, x: np.ndarray) -> list[np.ndarray]:
        """powers[j][k] is the k-th power of scaled coordinate j at every point."""
        scaled = [np.asarray(t, dtype=float) / self.T] + [
            (x[..., i] - self.center[i]) / self.half_width[i] for i in range(x.shape[-1])
        ]
        return [np.stack([coordinate**k for k in range(self.degree + 1)]) for coordinate in scaled]

    @staticmethod
    def value(exponent: tuple[int, ...], powers: list[np.ndarray]) -> np.ndarray:
        result = np.ones_like(powers[0][0])
        for j, k in enumerate(exponent):
            if k:
                result = result * powers[j][k]
        return result

    def partial(self, exponent: tuple[int, ...], powers: list[np.ndarray], j: int) -> np.ndarray:
        """Derivative with respect to the unscaled coordinate j (0 is t)."""
        if exponent[j] == 0:
            return np.zeros_like(powers[0][0])
        lowered = list(exponent)
        lowered[j] -= 1
        scale = self.T if j == 0 else self.half_width[j - 1]
        return (exponent[j] / scale) * self.value(tuple(lowered), powers)

    def generator(self, exponent: tuple[int, ...], powers: list[np.ndarray], f: np.ndarray) -> np.ndarray:
        """∂φ/∂t + ∇ₓφ · f at every point."""
        result = self.partial(exponent, powers, 0)
        for i in range(f.shape[-1]):
            if exponent[i + 1]:
                result = result + self.partial(exponent, powers, i + 1) * f[..., i]
        return result


def _axis_centers(lower: float, upper: float, count: int) -> np.ndarray:
    width = (upper - lower) / count
    return lower + width * (np.arange(count) + 0.5)


def _box_centers(box: BoxSpec, count: int) -> np.ndarray:
    axes = [_axis_centers(lo, hi, count) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def control_nodes(p: Problem, grid: GridSpec) -> np.ndarray:
    """Nu nodes per control dimension spanning U with its endpoints, as (count, m)."""
    axes = [np.linspace(lo, hi, grid.nu) for lo, hi in zip(p.controls.lower, p.controls.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _admissible_regions(p: Problem, eps: float) -> tuple[RegionSpec, RegionSpec]:
    if eps > 0:
        return shrink_region(p.omega, eps), shrink_region(p.target, eps)
    return p.omega, p.target


def _cells(p: Problem, grid: GridSpec, mode: Mode, eps: float) -> tuple[np.ndarray, np.ndarray]:
    omega, target = _admissible_regions(p, eps)
    x_centers = _box_centers(p.omega.bounding_box, grid.nx)
    x_centers = x_centers[omega.contains(x_centers, mode)]
    terminal = _box_centers(p.target.bounding_box, grid.nx)
    terminal = terminal[target.contains(terminal, mode) & omega.contains(terminal, mode)]
    if len(x_centers) == 0 or len(terminal) == 0:
        raise InnerApproximationEmptyError(eps if eps > 0 else None)

    t_centers = _axis_centers(0.0, p.T, grid.nt)
    nodes = control_nodes(p, grid)
    nt, nxc, nuc = len(t_centers), len(x_centers), len(nodes)
    mu_cells = np.concatenate(
        [
            np.repeat(t_centers, nxc * nuc)[:, None],
            np.tile(np.repeat(x_centers, nuc, axis=0), (nt, 1)),
            np.tile(nodes, (nt * nxc, 1)),
        ],
        axis=1,
    )
    return mu_cells, terminal


def assemble_lp(p: Problem, grid: GridSpec, mode: Mode = "closed", eps: float = 0.0) -> LinearProgram:
    """
    Builds the discretised LP: one Liouville row per test monomial (midpoint
    quadrature at cell centres) and the normalisation row Σμ∂ = 1.

    Raises:
        (InnerApproximationEmptyError): If no cell centre is admissible.
    """
    started = time.perf_counter()
    mu_cells, terminal_cells = _cells(p, grid, mode, eps)
    t, x, u = mu_cells[:, 0], mu_cells[:, 1 : 1 + p.n], mu_cells[:, 1 + p.n :]
    f = p.dynamics(t, x, u)
    running = p.lagrangian(t, x, u)
    terminal_cost = p.terminal_cost(terminal_cells)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(running)) and np.all(np.isfinite(terminal_cost))):
        raise SolverFailureError("The problem data is not finite at some grid cell centre.")

    basis = _Basis(p, grid.degree)
    mu_powers = basis.powers(t, x)
    terminal_powers = basis.powers(np.full(len(terminal_cells), p.T), terminal_cells)
    start_powers = basis.powers(np.zeros(1), p.x0[None, :])

    def row(exponent: tuple[int, ...]) -> tuple[np.ndarray, float]:
        coefficients = np.concatenate(
            [basis.generator(exponent, mu_powers, f), -basis.value(exponent, terminal_powers)]
        )
        rhs = -float(basis.value(exponent, start_powers)[0])
        scale = np.max(np.abs(coefficients))
        if scale > 0:
            coefficients, rhs = coefficients / scale, rhs / scale
        return coefficients, rhs

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(row, basis.exponents))

    normalization = np.concatenate([np.zeros(len(mu_cells)), np.ones(len(terminal_cells))])
    A = sp.vstack([sp.csr_matrix(r[0]) for r in rows] + [sp.csr_matrix(normalization)], format="csr")
    A.eliminate_zeros()
    b = np.array([r[1] for r in rows] + [1.0])
    labels = [basis.label(e) for e in basis.exponents] + [NORMALIZATION_ROW]

    occupation_logger.info(
        f"Assembled LP for '{p.name}': {len(mu_cells)} occupation + {len(terminal_cells)} terminal variables, "
        f"{len(labels)} rows ({mode}, ε={eps:g}) in {time.perf_counter() - started:.2f}s"
    )
    return LinearProgram(
        c=np.concatenate([running, terminal_cost]),
        A=A,
        b=b,
        row_labels=labels,
        mu_cells=mu_cells,
        terminal_cells=terminal_cells,
        grid=grid,
        mode=mode,
        epsilon=eps,
    )


def solve_lp(lp: LinearProgram, tolerance: Optional[float] = None) -> DiscreteOccupationMeasure:
    """
    Solves an assembled LP with HiGHS.

    Raises:
        (InfeasibleLPError), (UnboundedLPError), (SolverFailureError)
    """
    tolerance = default_config().lp_tolerance if tolerance is None else tolerance
    started = time.perf_counter()
    result = linprog(
        lp.c,
        A_eq=lp.A,
        b_eq=lp.b,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": tolerance, "dual_feasibility_tolerance": tolerance},
    )
    if result.status == 2:
        raise InfeasibleLPError()
    if result.status == 3:
        raise UnboundedLPError()
    if result.status != 0:
        raise SolverFailureError(f"The LP solver stopped: {result.message}")

    weights = np.maximum(result.x, 0.0)
    occupation_logger.info(f"LP solved in {time.perf_counter() - started:.2f}s, objective {result.fun:.6g}")
    return DiscreteOccupationMeasure(
        mu_weights=weights[: lp.mu_count],
        mu_cells=lp.mu_cells,
        boundary_weights=weights[lp.mu_count :],
        boundary_cells=lp.terminal_cells,
        objective=float(result.fun),
        grid=lp.grid,
        mode=lp.mode,
        epsilon=lp.epsilon,
    )


def solve_occupation(
    p: Problem, grid: Optional[GridSpec] = None, mode: Mode = "closed", eps: float = 0.0
) -> DiscreteOccupationMeasure:
    """
    Minimises Σ L·μ + Σ g·μ∂ over the discretised occupation measures; the
    objective estimates the relaxed infimum on (Ω, X), or on their ε-shrunk
    inner approximations when eps > 0.
    """
    return solve_lp(assemble_lp(p, grid or GridSpec.from_config(), mode, eps))


def _cell_index(values: np.ndarray, lower: np.ndarray, upper: np.ndarray, count: int) -> np.ndarray:
    width = (upper - lower) / count
    return np.clip(np.floor((values - lower) / width), 0, count - 1).astype(int)


def _cell_center(values: np.ndarray, lower: np.ndarray, upper: np.ndarray, count: int) -> np.ndarray:
    width = (upper - lower) / count
    return lower + width * (_cell_index(values, lower, upper, count) + 0.5)


def _nearest_node(u: np.ndarray, nodes_per_axis: list[np.ndarray]) -> np.ndarray:
    return np.stack(
        [axis[np.argmin(np.abs(u[..., j, None] - axis), axis=-1)] for j, axis in enumerate(nodes_per_axis)],
        axis=-1,
    )


def trajectory_measure(p: Problem, tr: Trajectory, control, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Pushes a trajectory onto the grid: every integration step deposits its
    length of mass in the cell of its midpoint, with the control at the
    nearest control node (Young measures split the mass by weight).

    Returns:
        (cells, weights, terminal_cell): cells as (count, 1+n+m) centres.
    """
    t_mid = 0.5 * (tr.time_grid[:-1] + tr.time_grid[1:])
    dt = np.diff(tr.time_grid)
    x_mid = 0.5 * (tr.states[:-1] + tr.states[1:])
    box = p.omega.bounding_box
    tc = _cell_center(t_mid, np.array(0.0), np.array(p.T), grid.nt)
    xc = _cell_center(x_mid, box.lower, box.upper, grid.nx)
    axes = [np.linspace(lo, hi, grid.nu) for lo, hi in zip(p.controls.lower, p.controls.upper)]

    if isinstance(control, YoungMeasureControl):
        interval = control.interval_index(t_mid)
        atoms = _nearest_node(control.atoms, axes)
        weights = control.weights[interval] * dt[:, None]
        count = len(atoms)
        cells = np.concatenate(
            [np.repeat(tc, count)[:, None], np.repeat(xc, count, axis=0), np.tile(atoms, (len(t_mid), 1))], axis=1
        )
        deposit = weights.ravel()
        keep = deposit > 0
        cells, deposit = cells[keep], deposit[keep]
    else:
        uc = _nearest_node(control.value_at(t_mid), axes)
        cells = np.concatenate([tc[:, None], xc, uc], axis=1)
        deposit = dt

    final = tr.final_state
    target_box = p.target.bounding_box
    terminal_box = target_box if np.all(target_box.contains(final)) else box
    terminal_cell = _cell_center(final, terminal_box.lower, terminal_box.upper, grid.nx)
    return cells, deposit, terminal_cell


def liouville_residual(p: Problem, tr: Trajectory, control, grid: Optional[GridSpec] = None) -> float:
    """
    Max absolute violation, over the test monomials of grid.degree, of the
    Liouville identity by the measure a trajectory induces (see
    trajectory_measure); μ∂ is the Dirac mass at the cell of γ(T).
    """
    grid = grid or GridSpec.from_config()
    cells, deposit, terminal_cell = trajectory_measure(p, tr, control, grid)
    t, x, u = cells[:, 0], cells[:, 1 : 1 + p.n], cells[:, 1 + p.n :]
    f = p.dynamics(t, x, u)
    basis = _Basis(p, grid.degree)
    powers = basis.powers(t, x)
    terminal_powers = basis.powers(np.array([p.T]), terminal_cell[None, :])
    start_powers = basis.powers(np.zeros(1), p.x0[None, :])

    residual = 0.0
    for exponent in basis.exponents:
        violation = (
            float(np.dot(deposit, basis.generator(exponent, powers, f)))
            + float(basis.value(exponent, start_powers)[0])
            - float(basis.value(exponent, terminal_powers)[0])
        )
        residual = max(residual, abs(violation))
    occupation_logger.debug(f"Liouville residual {residual:.3e} on grid {grid}")
    return residual


def export_lp(lp: LinearProgram, path: str) -> None:
    """
    Writes the LP as sparse triplets. Sections, in order: `rows R`, `cols C`,
    `entries NNZ` followed by NNZ lines `i j value`, `rhs` followed by R lines
    `i value`, `objective` followed by C lines `j value`. Indices are 0-based;
    the LP is minimize objective·w subject to A w = rhs, w >= 0.
    """
    coo = lp.A.tocoo()
    with open(path, "w", encoding="utf-8") as file:
        file.write(f"# relaxgap occupation LP: mode={lp.mode} epsilon={lp.epsilon!r} grid={lp.grid.to_dict()}\n")
        file.write(f"# row labels: {', '.join(lp.row_labels)}\n")
        file.write(f"rows {lp.A.shape[0]}\n")
        file.write(f"cols {lp.A.shape[1]}\n")
        file.write(f"entries {coo.nnz}\n")
        for i, j, value in zip(coo.row, coo.col, coo.data):
            file.write(f"{i} {j} {float(value)!r}\n")
        file.write("rhs\n")
        for i, value in enumerate(lp.b):
            file.write(f"{i} {float(value)!r}\n")
        file.write("objective\n")
        for j, value in enumerate(lp.c):
            file.write(f"{j} {float(value)!r}\n")
    occupation_logger.info(f"Exported LP ({lp.A.shape[0]}x{lp.A.shape[1]}, {coo.nnz} entries) to {path}")


def write_measure_csv(p: Problem, measure: DiscreteOccupationMeasure, path: str) -> None:
    """Columns t_center, x_center..., u_center..., weight; cells without mass are skipped."""
    header = ["t_center", *[f"{x}_center" for x in p.state_names], *[f"{u}_center" for u in p.control_names], "weight"]
    occupied = measure.mu_weights > 0
    rows = ([*cell, weight] for cell, weight in zip(measure.mu_cells[occupied], measure.mu_weights[occupied]))
    write_csv(path, header, rows)
