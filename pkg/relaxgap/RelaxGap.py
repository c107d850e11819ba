"""
Command line entry point: `relaxgap <command> <problem> [options]`.

The JSON result goes to standard output (or --out); logs go to standard
error. Exit codes: 0 success, 2 bad input, 3 solver failure.
"""
import argparse
import logging
import os
import sys
from typing import Any, Callable, Optional, Sequence

import numpy as np
import yaml

from relaxgap.Chattering import chattering_error, convergence_study
from relaxgap.ClassicalSolver import solve_classical
from relaxgap.CommandParser import CommandError, ParserExitedException, RelaxGapParser
from relaxgap.Conditions import assess_theorems, run_checks
from relaxgap.Config import CONFIG_ENV_VAR, Config, default_config
from relaxgap.Corpus import list_examples
from relaxgap.Dynamics import default_dt, integrate_classical, integrate_control, total_cost, write_trajectory_csv
from relaxgap.GapBound import gap_bound, write_gap_csv
from relaxgap.OccupationMeasure import (
    GridSpec,
    assemble_lp,
    export_lp,
    liouville_residual,
    solve_lp,
    write_measure_csv,
)
from relaxgap.Problem import Problem, YoungMeasureControl, load_control, load_problem, load_young_measure
from relaxgap.RelaxGapUtilities import configure_logging, dump_json, write_json
from relaxgap.Validator import validate_output
from relaxgap.relaxation_errors import InputError, OutputSchemaError, SolverError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3

cli_logger = logging.getLogger("relaxgap.cli")


def resolve_problem(reference: str) -> Problem:
    """
    Loads a problem file; a reference that isn't a file but names a bundled
    example (with or without .json) loads that example.
    """
    if not os.path.isfile(reference):
        stem = os.path.splitext(os.path.basename(reference))[0]
        for example in list_examples(include_slots=False):
            if example.name == stem:
                cli_logger.info(f"{reference} not found; using the bundled example '{stem}'")
                return example.load()
    return load_problem(reference)


def default_measure_csv(p: Problem, out: Optional[str]) -> str:
    """Beside --out when given (report.json -> report_measure.csv), else <problem>_measure.csv in the working directory."""
    if out:
        return f"{os.path.splitext(out)[0]}_measure.csv"
    return f"{p.name}_measure.csv"


def _grid(args: argparse.Namespace, config: Config) -> GridSpec:
    return GridSpec(
        config.grid_nt if args.nt is None else args.nt,
        config.grid_nx if args.nx is None else args.nx,
        config.grid_nu if args.nu is None else args.nu,
        config.test_degree if args.degree is None else args.degree,
    )


def solve_relaxed_command(args: argparse.Namespace, config: Config) -> dict:
    p = resolve_problem(args.problem)
    grid = _grid(args, config)
    measure = solve_lp(assemble_lp(p, grid, args.mode, args.eps), config.lp_tolerance)
    measure_csv = args.measure_csv or default_measure_csv(p, args.out)
    write_measure_csv(p, measure, measure_csv)
    return {
        "problem": p.name,
        "objective": measure.objective,
        "mode": measure.mode,
        "epsilon": measure.epsilon,
        "grid": grid.to_dict(),
        "total_mass": measure.total_mass,
        "occupied_cells": int(np.count_nonzero(measure.mu_weights > 0)),
        "terminal_cells": int(np.count_nonzero(measure.boundary_weights > 0)),
        "measure_csv": measure_csv,
    }


def solve_classical_command(args: argparse.Namespace, config: Config) -> dict:
    p = resolve_problem(args.problem)
    result = solve_classical(p, args.k, args.starts, args.seed, args.mode, config=config)
    if args.trajectory_csv:
        write_trajectory_csv(p, integrate_classical(p, result.best_control), args.trajectory_csv)
    return {"problem": p.name, **result.to_dict()}


def chatter_command(args: argparse.Namespace, config: Config) -> dict:
    p = resolve_problem(args.problem)
    y = load_young_measure(p, args.young)
    report = chattering_error(p, y, args.n, args.dt)
    document = {"problem": p.name, **report.to_dict()}
    if args.study:
        study = convergence_study(p, y, args.study, args.dt)
        document["study"] = {
            "N": [r.N for r in study.reports],
            "state_error": [r.state_error for r in study.reports],
            "cost_error": [r.cost_error for r in study.reports],
            "rate": study.rate,
        }
    return document


def check_command(args: argparse.Namespace, config: Config) -> Any:
    p = resolve_problem(args.problem)
    reports = run_checks(p, args.which, args.seed, args.samples, args.eta, config)
    documents = [report.to_dict() for report in reports]
    if not args.summary:
        return documents
    return {"problem": p.name, "reports": documents, "assessment": assess_theorems(p, reports).to_dict()}


def gap_bound_command(args: argparse.Namespace, config: Config) -> dict:
    p = resolve_problem(args.problem)
    report = gap_bound(
        p, args.ladder, _grid(args, config), args.k, args.starts, args.seed, args.mode, args.stability, config
    )
    if args.csv:
        write_gap_csv(report, args.csv)
    return {"problem": p.name, **report.to_dict()}


def residual_command(args: argparse.Namespace, config: Config) -> dict:
    p = resolve_problem(args.problem)
    control = load_control(p, args.control)
    grid = _grid(args, config)
    dt = default_dt(p) if args.dt is None else args.dt
    tr = integrate_control(p, control, dt)
    return {
        "problem": p.name,
        "residual": liouville_residual(p, tr, control, grid),
        "control_kind": "young" if isinstance(control, YoungMeasureControl) else "classical",
        "dt": dt,
        "grid": grid.to_dict(),
        "total_cost": total_cost(p, tr),
    }


def export_lp_command(args: argparse.Namespace, config: Config) -> dict:
    p = resolve_problem(args.problem)
    grid = _grid(args, config)
    lp = assemble_lp(p, grid, args.mode, args.eps)
    export_lp(lp, args.out)
    return {
        "problem": p.name,
        "path": args.out,
        "rows": int(lp.A.shape[0]),
        "cols": int(lp.A.shape[1]),
        "entries": int(lp.A.nnz),
        "mode": lp.mode,
        "epsilon": lp.epsilon,
        "grid": grid.to_dict(),
    }


COMMANDS: dict[str, Callable[[argparse.Namespace, Config], Any]] = {
    "solve-relaxed": solve_relaxed_command,
    "solve-classical": solve_classical_command,
    "chatter": chatter_command,
    "check": check_command,
    "gap-bound": gap_bound_command,
    "residual": residual_command,
    "export-lp": export_lp_command,
}


def _load_config(path: Optional[str]) -> Config:
    # library calls without an explicit config read default_config(), so point it at the same file
    if path:
        if not os.path.isfile(path):
            raise FileNotFoundError(f"No config file at {path}")
        os.environ[CONFIG_ENV_VAR] = path
        default_config.cache_clear()
    return default_config()


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Runs one subcommand and returns the process exit code."""
    try:
        args = RelaxGapParser().parse(argv)
    except ParserExitedException as exited:
        sys.stdout.write(str(exited))
        return EXIT_OK
    except CommandError as err:
        sys.stderr.write(f"{err}\n")
        return EXIT_INPUT

    try:
        config = _load_config(args.config)
    except (OSError, yaml.YAMLError, KeyError, ValueError) as err:
        sys.stderr.write(f"relaxgap: could not load the config: {err}\n")
        return EXIT_INPUT
    configure_logging(config, args.log_level)

    try:
        document = validate_output(args.command, COMMANDS[args.command](args, config))
        # export-lp's --out is the LP dump itself
        if args.command != "export-lp" and args.out:
            write_json(document, args.out)
        else:
            sys.stdout.write(dump_json(document))
    except InputError as err:
        cli_logger.error(str(err))
        return EXIT_INPUT
    except SolverError as err:
        cli_logger.error(str(err))
        return EXIT_SOLVER
    except OutputSchemaError as err:
        cli_logger.error(str(err))
        return EXIT_INTERNAL
    except OSError as err:
        cli_logger.error(f"{err.strerror or err}: {err.filename}" if err.filename else str(err))
        return EXIT_INPUT
    except ValueError as err:
        cli_logger.error(str(err))
        return EXIT_INPUT
    return EXIT_OK


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
