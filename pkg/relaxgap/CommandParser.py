import argparse
from typing import IO, NoReturn, Optional, Sequence

from relaxgap.Conditions import CHECKS


class CommandError(ValueError):
    """
    Indicates that the command parser encountered an error while parsing.
    The message starts with the usage text of the (sub)command.
    """


class ParserExitedException(Exception):
    """
    Indicates that argparse would have exited (asking for help does this).
    The message is the help text.
    """


class CommandParser(argparse.ArgumentParser):
    """
    A wrapper over argparse that raises instead of exiting, so run() can
    decide the exit code and where the text goes.
    """

    def error(self, message):
        """
        By default, argparse exits the program on error.
        This makes it so that it raises an exception instead.
        """
        raise CommandError(f"{self.format_usage()}{self.prog}: error: {message}")

    def exit(self, status: int = 0, message: str | None = None) -> NoReturn:
        """
        Asking for help exits the program after printing.
        This makes it so that it raises an exception carrying the help text instead.
        """
        raise ParserExitedException(self.format_help())

    def print_help(self, file: IO[str] | None = None) -> None:
        """Overriden so help is only emitted through ParserExitedException"""


def _comma_floats(value: str) -> list[float]:
    try:
        return [float(part) for part in value.split(",") if part.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got '{value}'") from err


def _comma_ints(value: str) -> list[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got '{value}'") from err


def _check_names(value: str) -> list[str]:
    names = [part.strip().lower() for part in value.split(",") if part.strip()]
    unknown = [name for name in names if name not in CHECKS]
    if unknown or not names:
        raise argparse.ArgumentTypeError(f"choose checks from {','.join(CHECKS)}, got '{value}'")
    return names


class RelaxGapParser:
    def __init__(self):
        self.parser = CommandParser(
            prog="relaxgap",
            description="Estimates and bounds the gap between classical and relaxed optimal control infima.",
            add_help=True,
        )
        self.parser.add_argument("--config", default=None, help="Path of the config.yaml to use.")
        self.parser.add_argument(
            "--log-level",
            default=None,
            dest="log_level",
            choices=["DEBUG", "INFO", "WARNING", "ERROR"],
            type=str.upper,
            help="Overrides log_level from the config.",
        )
        subparsers = self.parser.add_subparsers(dest="command", required=True, metavar="command")

        solve_relaxed = subparsers.add_parser("solve-relaxed", help="Solve the occupation-measure LP.")
        self._add_problem(solve_relaxed)
        self._add_grid(solve_relaxed)
        solve_relaxed.add_argument("--eps", type=float, default=0.0, help="Shrink Ω and X by ε before solving.")
        self._add_mode(solve_relaxed)
        self._add_out(solve_relaxed)
        solve_relaxed.add_argument(
            "--measure-csv",
            dest="measure_csv",
            default=None,
            help="Where to write the occupied cells (default: beside --out, else <problem>_measure.csv).",
        )

        solve_classical = subparsers.add_parser("solve-classical", help="Direct solve over piecewise-constant controls.")
        self._add_problem(solve_classical)
        self._add_direct(solve_classical)
        self._add_mode(solve_classical)
        self._add_out(solve_classical)
        solve_classical.add_argument(
            "--trajectory-csv", dest="trajectory_csv", default=None, help="Write the best trajectory here."
        )

        chatter = subparsers.add_parser("chatter", help="Realise a Young measure by a switching control.")
        self._add_problem(chatter)
        chatter.add_argument("--young", required=True, help="Young measure file.")
        chatter.add_argument("--n", type=int, default=10, help="Frames per interval.")
        chatter.add_argument("--dt", type=float, default=None, help="Integration step (default T/default_steps).")
        chatter.add_argument(
            "--study", type=_comma_ints, default=None, help="Also fit the convergence rate over these N, e.g. 10,20,40."
        )
        self._add_out(chatter)

        check = subparsers.add_parser("check", help="Sample-check the no-gap conditions.")
        self._add_problem(check)
        check.add_argument("--which", type=_check_names, default=list(CHECKS), help="Comma separated, e.g. fw1,ipc.")
        check.add_argument("--seed", type=int, default=0)
        check.add_argument("--samples", type=int, default=None, help="Overrides each check's sample count.")
        check.add_argument("--eta", type=float, default=None, help="Inward margin for the IPC check.")
        check.add_argument(
            "--summary", action="store_true", default=False, help="Wrap the reports with the theorem assessment."
        )
        self._add_out(check)

        gap = subparsers.add_parser("gap-bound", help="Estimate the gap bound along an ε ladder.")
        self._add_problem(gap)
        gap.add_argument("--ladder", type=_comma_floats, default=None, help="Decreasing ε values, e.g. 0.2,0.1,0.05.")
        self._add_grid(gap)
        self._add_direct(gap)
        self._add_mode(gap)
        gap.add_argument("--csv", default=None, help="Write one row per rung here.")
        gap.add_argument(
            "--stability", action="store_true", default=False, help="Also compare the LP on the δ-shrunk sets."
        )
        self._add_out(gap)

        residual = subparsers.add_parser("residual", help="Liouville residual of a control's trajectory.")
        self._add_problem(residual)
        residual.add_argument("--control", required=True, help="Classical control or Young measure file.")
        residual.add_argument("--dt", type=float, default=None)
        self._add_grid(residual)
        self._add_out(residual)

        export = subparsers.add_parser("export-lp", help="Dump the occupation LP as sparse triplets.")
        self._add_problem(export)
        export.add_argument("--out", required=True, help="Where to write the LP.")
        self._add_grid(export)
        self._add_mode(export)
        export.add_argument("--eps", type=float, default=0.0)

    @staticmethod
    def _add_problem(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("problem", help="Problem file, or the name of a bundled example.")

    @staticmethod
    def _add_grid(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--nt", type=int, default=None, help="Time cells.")
        parser.add_argument("--nx", type=int, default=None, help="Cells per state dimension.")
        parser.add_argument("--nu", type=int, default=None, help="Control nodes per control dimension.")
        parser.add_argument("--degree", type=int, default=None, help="Maximum test monomial degree.")

    @staticmethod
    def _add_direct(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--k", type=int, default=None, help="Control pieces.")
        parser.add_argument("--starts", type=int, default=None, help="Random starts.")
        parser.add_argument("--seed", type=int, default=0)

    @staticmethod
    def _add_mode(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--mode", choices=["open", "closed"], default="closed", help="Boundary handling.")

    @staticmethod
    def _add_out(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--out", default=None, help="Write the JSON result here instead of standard output.")

    def parse(self, argv: Optional[Sequence[str]]) -> argparse.Namespace:
        return self.parser.parse_args(argv)
