"""
The optimal control problem instance: dynamics, costs, state domain, target
and control box, plus the control representations (classical piecewise
constant controls and finitely supported Young measures) and their loaders.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Literal, Optional, Sequence

import numpy as np
from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError

from relaxgap.ExprLang import BinOp, Expr, Num, VectorFunction, compile_expr, free_variables, parse, to_source
from relaxgap.relaxation_errors import (
    ExprSyntaxError,
    InputError,
    ProblemInvariantError,
    ProblemSchemaError,
    UnknownIdentifierError,
)

problem_logger = logging.getLogger("relaxgap.problem")

Mode = Literal["open", "closed"]
INVARIANT_SAMPLES = 100
WEIGHT_TOLERANCE = 1e-12
TIME_TOLERANCE = 1e-9


# ---------------------------------------------------------------------------
# file schema
# ---------------------------------------------------------------------------

class BoxFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lower: list[float]
    upper: list[float]


class RegionFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["implicit", "box"]
    h: Optional[str] = None
    lower: Optional[list[float]] = None
    upper: Optional[list[float]] = None
    bounding_box: BoxFile


class ProblemFile(BaseModel):
    """The JSON document describing one problem. Keys are lowercase; the horizon may be "T" or "t"."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    name: str
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    horizon: float = Field(validation_alias=AliasChoices("T", "t"))
    x0: list[float]
    f: list[str]
    lagrangian: str
    terminal_cost: str
    omega: RegionFile
    target: RegionFile
    controls: BoxFile


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

def _frozen_array(values: Any) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class BoxSpec:
    """A nonempty compact box [lower, upper]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _frozen_array(self.lower))
        object.__setattr__(self, "upper", _frozen_array(self.upper))

    @property
    def dim(self) -> int:
        return int(self.lower.shape[0])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def margin(self, x: np.ndarray) -> np.ndarray:
        """Signed distance to the nearest face; nonnegative exactly on the box."""
        x = np.asarray(x, dtype=float)
        return np.minimum(x - self.lower, self.upper - x).min(axis=-1)

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.margin(x) >= 0

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))

    def corners(self) -> np.ndarray:
        grids = np.meshgrid(*[(lo, hi) for lo, hi in zip(self.lower, self.upper)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class RegionSpec:
    """
    A state region: {x : h(x) > 0} for the implicit kind, an axis-aligned box
    for the box kind, always intersected with a compact bounding box.
    """

    kind: Literal["implicit", "box"]
    bounding_box: BoxSpec
    h: Optional[Expr] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    h_function: Optional[VectorFunction] = field(init=False, default=None, repr=False)

    def __post_init__(self):
        if self.kind == "implicit":
            object.__setattr__(self, "h_function", compile_expr(self.h))
        else:
            object.__setattr__(self, "lower", _frozen_array(self.lower))
            object.__setattr__(self, "upper", _frozen_array(self.upper))

    @property
    def dim(self) -> int:
        return self.bounding_box.dim

    def kind_margin(self, x: np.ndarray) -> np.ndarray:
        """h(x) for the implicit kind, the signed distance to the nearest face for boxes."""
        x = np.asarray(x, dtype=float)
        if self.kind == "implicit":
            zeros = np.zeros(x.shape[:-1] + (1,))
            return np.asarray(self.h_function(zeros[..., 0], x, zeros))
        return np.minimum(x - self.lower, self.upper - x).min(axis=-1)

    def contains(self, x: np.ndarray, mode: Mode = "closed") -> np.ndarray:
        """Vectorised membership; NaN values of h count as outside."""
        margin = self.kind_margin(x)
        inside_box = self.bounding_box.contains(x)
        with np.errstate(invalid="ignore"):
            inside = margin > 0 if mode == "open" else margin >= 0
        return np.logical_and(inside, inside_box)

    def squared_violation(self, x: np.ndarray, delta: float = 0.0) -> np.ndarray:
        """
        Squared constraint violation of x, asking for margin delta from the
        boundary (delta > 0 emulates the open region). Boxes use the Euclidean
        distance to the shrunk box; implicit regions use max(0, delta - h)^2.
        Leaving the bounding box adds its squared distance.
        """
        x = np.asarray(x, dtype=float)
        box_excess = x - self.bounding_box.clip(x)
        violation = np.sum(box_excess**2, axis=-1)
        if self.kind == "implicit":
            margin = np.nan_to_num(self.kind_margin(x), nan=-1e6)
            violation = violation + np.maximum(0.0, delta - margin) ** 2
        else:
            lower = self.lower + delta
            upper = self.upper - delta
            excess = x - np.clip(x, lower, np.maximum(lower, upper))
            violation = violation + np.sum(excess**2, axis=-1)
        return violation

    def to_dict(self) -> dict:
        document: dict[str, Any] = {"kind": self.kind, "bounding_box": self.bounding_box.to_dict()}
        if self.kind == "implicit":
            document["h"] = to_source(self.h)
        else:
            document["lower"] = self.lower.tolist()
            document["upper"] = self.upper.tolist()
        return document


def region_contains(r: RegionSpec, x: Sequence[float], mode: Mode = "closed") -> bool:
    """
    Membership of a single point: h(x) > 0 (open) or h(x) >= 0 (closed) for the
    implicit kind, strict or non-strict bounds for boxes, and always inside the
    bounding box.
    """
    point = np.asarray(x, dtype=float)
    if point.shape != (r.dim,):
        raise ValueError(f"Expected a point of dimension {r.dim}, got shape {point.shape}")
    return bool(r.contains(point, mode))


def shrink_region(r: RegionSpec, eps: float) -> RegionSpec:
    """
    The inner approximation of r: {h >= eps} for implicit regions, each side
    moved inward by eps for boxes. The bounding box is kept.
    """
    if r.kind == "implicit":
        return RegionSpec("implicit", r.bounding_box, h=BinOp("-", r.h, Num(eps)))
    return RegionSpec("box", r.bounding_box, lower=r.lower + eps, upper=r.upper - eps)


def same_region(a: RegionSpec, b: RegionSpec) -> bool:
    """Structural equality of two region descriptions."""
    if a.kind != b.kind:
        return False
    same_box = np.array_equal(a.bounding_box.lower, b.bounding_box.lower) and np.array_equal(
        a.bounding_box.upper, b.bounding_box.upper
    )
    if a.kind == "implicit":
        return same_box and a.h == b.h
    return same_box and np.array_equal(a.lower, b.lower) and np.array_equal(a.upper, b.upper)


@dataclass(frozen=True, eq=False)
class ClassicalControl:
    """A piecewise-constant control: values[k] on [time_grid[k], time_grid[k+1])."""

    time_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "time_grid", _frozen_array(self.time_grid))
        object.__setattr__(self, "values", _frozen_array(values))
        if self.time_grid.ndim != 1 or len(self.time_grid) != len(self.values) + 1:
            raise ProblemSchemaError("time_grid", "needs exactly one more breakpoint than values")
        if np.any(np.diff(self.time_grid) <= 0):
            raise ProblemInvariantError("time grid increasing")

    @property
    def intervals(self) -> int:
        return len(self.values)

    def interval_index(self, t: np.ndarray) -> np.ndarray:
        index = np.searchsorted(self.time_grid, t, side="right") - 1
        return np.clip(index, 0, self.intervals - 1)

    def value_at(self, t: np.ndarray) -> np.ndarray:
        return self.values[self.interval_index(t)]

    @classmethod
    def uniform(cls, T: float, values: Any) -> "ClassicalControl":
        values = np.asarray(values, dtype=float)
        return cls(np.linspace(0.0, T, len(values) + 1), values)

    @classmethod
    def constant(cls, T: float, value: Any, intervals: int = 1) -> "ClassicalControl":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls.uniform(T, np.tile(value, (intervals, 1)))

    def merged(self) -> "ClassicalControl":
        """The same control with neighbouring pieces of equal value joined."""
        keep = np.concatenate([[True], np.any(self.values[1:] != self.values[:-1], axis=1)])
        if np.all(keep):
            return self
        return ClassicalControl(np.append(self.time_grid[:-1][keep], self.time_grid[-1]), self.values[keep])

    def to_dict(self) -> dict:
        return {"time_grid": self.time_grid.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class YoungMeasureControl:
    """
    Piecewise-constant-in-time probability weights over shared control atoms:
    on [time_grid[k], time_grid[k+1]) the measure is sum_i weights[k, i] δ_{atoms[i]}.
    """

    time_grid: np.ndarray
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "time_grid", _frozen_array(self.time_grid))
        object.__setattr__(self, "atoms", _frozen_array(atoms))
        object.__setattr__(self, "weights", _frozen_array(weights))
        if len(self.time_grid) != len(self.weights) + 1:
            raise ProblemSchemaError("time_grid", "needs exactly one more breakpoint than weight rows")
        if self.weights.shape[1] != len(self.atoms):
            raise ProblemSchemaError("weights", "each row needs one weight per atom")
        if np.any(np.diff(self.time_grid) <= 0):
            raise ProblemInvariantError("time grid increasing")
        if np.any(self.weights < 0):
            raise ProblemInvariantError("weights >= 0")
        if np.any(np.abs(self.weights.sum(axis=1) - 1.0) > WEIGHT_TOLERANCE):
            raise ProblemInvariantError("weight rows sum to 1")

    @property
    def intervals(self) -> int:
        return len(self.weights)

    def interval_index(self, t: np.ndarray) -> np.ndarray:
        index = np.searchsorted(self.time_grid, t, side="right") - 1
        return np.clip(index, 0, self.intervals - 1)

    @classmethod
    def dirac(cls, control: ClassicalControl) -> "YoungMeasureControl":
        """The Young measure δ_{u(t)} of a classical control (one atom per interval)."""
        return cls(control.time_grid, control.values, np.eye(control.intervals))

    def to_dict(self) -> dict:
        return {
            "time_grid": self.time_grid.tolist(),
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Problem:
    """A fixed-horizon optimal control problem with state constraints."""

    name: str
    n: int
    m: int
    T: float
    x0: np.ndarray
    f: tuple[Expr, ...]
    L: Expr
    g: Expr
    omega: RegionSpec
    target: RegionSpec
    controls: BoxSpec
    f_functions: tuple[VectorFunction, ...] = field(init=False, repr=False)
    L_function: VectorFunction = field(init=False, repr=False)
    g_function: VectorFunction = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "x0", _frozen_array(self.x0))
        object.__setattr__(self, "f", tuple(self.f))
        object.__setattr__(self, "f_functions", tuple(compile_expr(e) for e in self.f))
        object.__setattr__(self, "L_function", compile_expr(self.L))
        object.__setattr__(self, "g_function", compile_expr(self.g))

    @property
    def state_names(self) -> list[str]:
        return [f"x{i + 1}" for i in range(self.n)]

    @property
    def control_names(self) -> list[str]:
        return [f"u{j + 1}" for j in range(self.m)]

    def is_autonomous(self, include_lagrangian: bool = True) -> bool:
        """True when neither f (nor L, if asked) mentions t."""
        expressions = list(self.f) + ([self.L] if include_lagrangian else [])
        return all("t" not in free_variables(e) for e in expressions)

    def dynamics(self, t, x, u) -> np.ndarray:
        """f(t, x, u) with components on the last axis."""
        return np.stack([fn(t, x, u) for fn in self.f_functions], axis=-1)

    def lifted(self, t, x, u) -> np.ndarray:
        """(f(t, x, u), L(t, x, u)): the parametrisation of the lifted inclusion."""
        return np.stack([fn(t, x, u) for fn in self.f_functions] + [self.L_function(t, x, u)], axis=-1)

    def lagrangian(self, t, x, u) -> np.ndarray:
        return self.L_function(t, x, u)

    def terminal_cost(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        zeros = np.zeros(x.shape[:-1] + (1,))
        return self.g_function(zeros[..., 0], x, zeros)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "T": self.T,
            "x0": self.x0.tolist(),
            "f": [to_source(e) for e in self.f],
            "lagrangian": to_source(self.L),
            "terminal_cost": to_source(self.g),
            "omega": self.omega.to_dict(),
            "target": self.target.to_dict(),
            "controls": self.controls.to_dict(),
        }


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------

def _schema_error(err: ValidationError) -> ProblemSchemaError:
    first = err.errors()[0]
    location = ".".join(str(part) for part in first["loc"]) or "(document)"
    location = location.replace("horizon", "T")
    return ProblemSchemaError(location, first["msg"])


def _parse_field(source: str, variables: Sequence[str], field_path: str) -> Expr:
    try:
        return parse(source, variables)
    except (ExprSyntaxError, UnknownIdentifierError) as err:
        raise ProblemSchemaError(field_path, str(err)) from err


def _build_box(box: BoxFile, dim: int, field_path: str) -> BoxSpec:
    if len(box.lower) != dim or len(box.upper) != dim:
        raise ProblemSchemaError(field_path, f"lower and upper need {dim} entries")
    spec = BoxSpec(box.lower, box.upper)
    if np.any(spec.lower > spec.upper):
        raise ProblemInvariantError(f"{field_path}: lower <= upper")
    return spec


def _build_region(region: RegionFile, n: int, field_path: str) -> RegionSpec:
    bounding_box = _build_box(region.bounding_box, n, f"{field_path}.bounding_box")
    if np.any(bounding_box.upper - bounding_box.lower <= 0):
        raise ProblemInvariantError(f"{field_path}: bounding box has strictly positive side lengths")
    if region.kind == "implicit":
        if region.h is None:
            raise ProblemSchemaError(f"{field_path}.h", "required for implicit regions")
        h = _parse_field(region.h, [f"x{i + 1}" for i in range(n)], f"{field_path}.h")
        return RegionSpec("implicit", bounding_box, h=h)
    if region.lower is None or region.upper is None:
        raise ProblemSchemaError(f"{field_path}.lower", "box regions need lower and upper")
    box = _build_box(BoxFile(lower=region.lower, upper=region.upper), n, field_path)
    return RegionSpec("box", bounding_box, lower=box.lower, upper=box.upper)


def validate_problem(p: Problem, seed: int = 0) -> None:
    """
    Checks the invariants of a problem: T > 0, x0 ∈ Ω, finiteness of f and L on
    random samples of [0,T] × box(Ω) × U, finiteness of h on its bounding box.

    Raises:
        (ProblemInvariantError): Naming the failing check.
    """
    if not p.T > 0:
        raise ProblemInvariantError("T > 0", f"T={p.T}")
    if len(p.x0) != p.n:
        raise ProblemInvariantError("x0 has n entries")
    rng = np.random.default_rng(seed)
    for label, region in (("omega", p.omega), ("target", p.target)):
        if region.kind == "implicit":
            values = region.kind_margin(region.bounding_box.sample(rng, INVARIANT_SAMPLES))
            if not np.all(np.isfinite(values)):
                raise ProblemInvariantError(f"{label}: h finite on the bounding box")
    if not region_contains(p.omega, p.x0, "closed"):
        raise ProblemInvariantError("x0 ∈ Ω", f"x0={p.x0.tolist()}")

    t = rng.uniform(0.0, p.T, size=INVARIANT_SAMPLES)
    x = p.omega.bounding_box.sample(rng, INVARIANT_SAMPLES)
    u = p.controls.sample(rng, INVARIANT_SAMPLES)
    if not np.all(np.isfinite(p.lifted(t, x, u))):
        raise ProblemInvariantError("f and L finite on samples")


def problem_from_dict(document: dict, source: str = "<memory>") -> Problem:
    """
    Builds and validates a Problem from a parsed problem document.

    Raises:
        (ProblemSchemaError): For schema violations, with the field path.
        (ProblemInvariantError): For invariant violations, naming the check.
    """
    try:
        data = ProblemFile.model_validate(document)
    except ValidationError as err:
        raise _schema_error(err) from err

    n, m = data.n, data.m
    dynamics_variables = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)]
    if len(data.f) != n:
        raise ProblemSchemaError("f", f"needs {n} expressions")
    if len(data.x0) != n:
        raise ProblemSchemaError("x0", f"needs {n} entries")

    problem = Problem(
        name=data.name,
        n=n,
        m=m,
        T=data.horizon,
        x0=data.x0,
        f=tuple(_parse_field(src, dynamics_variables, f"f.{i}") for i, src in enumerate(data.f)),
        L=_parse_field(data.lagrangian, dynamics_variables, "lagrangian"),
        g=_parse_field(data.terminal_cost, [f"x{i + 1}" for i in range(n)], "terminal_cost"),
        omega=_build_region(data.omega, n, "omega"),
        target=_build_region(data.target, n, "target"),
        controls=_build_box(data.controls, m, "controls"),
    )
    validate_problem(problem)
    problem_logger.debug(f"Loaded problem '{problem.name}' from {source} (n={n}, m={m}, T={problem.T})")
    return problem


def _read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as file:
        try:
            return json.load(file)
        except json.JSONDecodeError as err:
            raise InputError(f"{path} is not valid JSON: {err}") from err


def load_problem(path: str) -> Problem:
    """
    Loads a problem file (see docs/formats.md) and validates it eagerly.
    """
    document = _read_json(path)
    if not isinstance(document, dict):
        raise ProblemSchemaError("(document)", "expected a JSON object")
    return problem_from_dict(document, source=path)


def check_control_in_box(p: Problem, points: np.ndarray, what: str) -> None:
    if points.shape[-1] != p.m:
        raise ProblemSchemaError(what, f"control points need {p.m} components")
    tolerance = 1e-12
    if np.any(points < p.controls.lower - tolerance) or np.any(points > p.controls.upper + tolerance):
        raise ProblemInvariantError(f"{what} lie in U")


def check_time_grid(p: Problem, time_grid: np.ndarray) -> None:
    if abs(time_grid[0]) > TIME_TOLERANCE or abs(time_grid[-1] - p.T) > TIME_TOLERANCE:
        raise ProblemInvariantError("time grid spans [0, T]")


def young_measure_from_dict(p: Problem, document: dict) -> YoungMeasureControl:
    try:
        y = YoungMeasureControl(document["time_grid"], document["atoms"], document["weights"])
    except KeyError as err:
        raise ProblemSchemaError(str(err.args[0]), "missing") from err
    check_time_grid(p, y.time_grid)
    check_control_in_box(p, y.atoms, "atoms")
    return y


def control_from_dict(p: Problem, document: dict) -> ClassicalControl:
    try:
        c = ClassicalControl(document["time_grid"], document["values"])
    except KeyError as err:
        raise ProblemSchemaError(str(err.args[0]), "missing") from err
    check_time_grid(p, c.time_grid)
    check_control_in_box(p, c.values, "values")
    return c


def load_young_measure(p: Problem, path: str) -> YoungMeasureControl:
    """Reads {"time_grid": [...], "atoms": [[...]], "weights": [[...]]}."""
    return young_measure_from_dict(p, _read_json(path))


def load_control(p: Problem, path: str):
    """Reads a classical control file, or a Young measure file if it has atoms."""
    document = _read_json(path)
    if isinstance(document, dict) and "control" in document:
        document = document["control"]
    if isinstance(document, dict) and "atoms" in document:
        return young_measure_from_dict(p, document)
    if not isinstance(document, dict):
        raise ProblemSchemaError("(document)", "expected a JSON object")
    return control_from_dict(p, document)
