from typing import Iterable, Optional


class RelaxGapError(ValueError):
    """
    Base class for every error raised by relaxgap.
    """

    def __init__(self, message="relaxgap could not complete the request."):
        super().__init__(message)


class InputError(RelaxGapError):
    """
    Raised when user supplied data (a problem file, an expression, a control
    file) cannot be used. The command line maps these to exit code 2.
    """


class SolverError(RelaxGapError):
    """
    Raised when a numerical method fails on otherwise valid input. The command
    line maps these to exit code 3.
    """


class ExprSyntaxError(InputError):
    """
    Raised when an expression string does not follow the grammar.

    Attributes:
        offset (int): Byte offset of the offending token in the UTF-8 source.
        expected (frozenset[str]): The tokens that would have been accepted.
    """

    def __init__(self, message: str, offset: int, expected: Iterable[str] = ()):
        self.offset: int = offset
        self.expected: frozenset[str] = frozenset(expected)
        detail = f"{message} at byte {offset}"
        if self.expected:
            detail += f"; expected one of: {', '.join(sorted(self.expected))}"
        super().__init__(detail)


class UnknownIdentifierError(InputError):
    """
    Raised when an expression names a variable or function that isn't declared.
    """

    def __init__(self, name: str, offset: int, declared: Iterable[str]):
        self.name: str = name
        self.offset: int = offset
        self.declared: tuple[str, ...] = tuple(declared)
        super().__init__(
            f"Unknown identifier '{name}' at byte {offset}. "
            f"Declared variables: {', '.join(self.declared) or '(none)'}"
        )


class UnboundVariableError(InputError):
    """
    Raised when an expression is evaluated without a value for one of its variables.
    """

    def __init__(self, name: str):
        self.name: str = name
        super().__init__(f"No value bound for variable '{name}'.")


class ExprDomainError(InputError):
    """
    Raised when evaluation leaves the domain of an operation, e.g. the square
    root of a negative number or a division by zero.
    """

    def __init__(self, message: str, subexpression: str):
        self.subexpression: str = subexpression
        super().__init__(f"{message} in '{subexpression}'")


class ProblemSchemaError(InputError):
    """
    Raised when a problem file doesn't match the problem schema.
    """

    def __init__(self, field_path: str, message: str = "invalid value"):
        self.field_path: str = field_path
        super().__init__(f"Problem file field '{field_path}': {message}")


class ProblemInvariantError(InputError):
    """
    Raised when a structurally valid problem breaks one of its invariants.
    """

    def __init__(self, check: str, detail: str = ""):
        self.check: str = check
        message = f"Problem invariant violated: {check}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class InnerApproximationEmptyError(SolverError):
    """
    Raised when shrinking a region, or discretising it, leaves nothing behind.
    """

    def __init__(self, epsilon: Optional[float] = None):
        self.epsilon: Optional[float] = epsilon
        if epsilon is None:
            super().__init__("inner approximation empty")
        else:
            super().__init__(f"inner approximation empty at ε={epsilon:g}")


class BlowUpError(SolverError):
    """
    Raised when an integrated state stops being finite.
    """

    def __init__(self, time: float):
        self.time: float = time
        super().__init__(f"Trajectory blew up (nonfinite state) at t={time:.6g}")


class InfeasibleLPError(SolverError):
    """
    Raised when the discretised occupation-measure LP has no feasible point.
    """

    def __init__(self, message="The occupation-measure LP is infeasible.", certificate_row: Optional[str] = None):
        self.certificate_row: Optional[str] = certificate_row
        if certificate_row:
            message += f" Certificate row: {certificate_row}"
        else:
            message += " No infeasibility certificate is available from the solver."
        super().__init__(message)


class UnboundedLPError(SolverError):
    """
    Raised when the occupation-measure LP is unbounded. On a compact box this
    means the problem data (L or g) isn't bounded below.
    """

    def __init__(self, message="The occupation-measure LP is unbounded; check that L and g are bounded below on the bounding box."):
        super().__init__(message)


class SolverFailureError(SolverError):
    """
    Raised when the LP backend stops without an optimal, infeasible or
    unbounded verdict.
    """

    def __init__(self, message="The LP solver failed."):
        super().__init__(message)


class OutputSchemaError(RelaxGapError):
    """
    Raised when a result document does not match its shipped JSON schema.
    This is a bug in relaxgap, not in the input.
    """

    def __init__(self, command: str, detail: str):
        self.command: str = command
        super().__init__(f"The {command} result does not match its schema: {detail}")
