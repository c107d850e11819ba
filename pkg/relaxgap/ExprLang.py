"""
Parse, print, evaluate and differentiate the scalar expressions that define
problem data (dynamics, Lagrangian, terminal cost, region functions).

Grammar, loosest binding first:

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

`^` is right associative and binds tighter than unary minus, so `-x^2` is
`-(x^2)`. There is no implicit multiplication.
"""
import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from relaxgap.relaxation_errors import (
    ExprDomainError,
    ExprSyntaxError,
    UnboundVariableError,
    UnknownIdentifierError,
)

FUNCTION_ARITY: dict[str, int] = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "sqrt": 1,
    "abs": 1,
    "floor": 1,
    "min": 2,
    "max": 2,
}
NONSMOOTH_FUNCTIONS = frozenset({"abs", "floor", "min", "max"})
DEFAULT_VARIABLE_PATTERN = re.compile(r"^(t|x[1-9]\d*|u[1-9]\d*)$")
FD_STEP: float = 1e-6

# binding strength used by the printer
_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PRECEDENCE = 3
_POW_PRECEDENCE = 4
_ATOM_PRECEDENCE = 5


class Expr:
    """Base class of the immutable expression tree."""

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"Literals must be finite and nonnegative, got {self.value!r}")


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple[Expr, ...]


ZERO = Num(0.0)
ONE = Num(1.0)


class Gradient(NamedTuple):
    partials: list[Expr]
    # when set, callers must differentiate by central differences instead
    fallback: bool


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_PATTERN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class _Token(NamedTuple):
    kind: str
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    position = 0
    while position < len(source):
        if source[position].isspace():
            position += 1
            continue
        match = _TOKEN_PATTERN.match(source, position)
        if not match or match.end() == position:
            raise ExprSyntaxError(
                f"Unexpected character {source[position]!r}",
                _byte_offset(source, position),
                ("number", "name", "operator"),
            )
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(_Token(kind, match.group(kind), _byte_offset(source, start)))
        position = match.end()
    tokens.append(_Token("end", "", len(source.encode("utf-8"))))
    return tokens


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


class _Parser:
    """Recursive-descent parser over the token list."""

    def __init__(self, source: str, variables: Optional[Sequence[str]]):
        self.tokens = _tokenize(source)
        self.index = 0
        self.variables = tuple(variables) if variables is not None else None

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text: str) -> _Token:
        token = self.peek()
        if token.text != text or token.kind == "end":
            raise ExprSyntaxError(f"Unexpected {self.describe(token)}", token.offset, (repr(text),))
        return self.advance()

    @staticmethod
    def describe(token: _Token) -> str:
        return "end of input" if token.kind == "end" else f"token {token.text!r}"

    def parse(self) -> Expr:
        tree = self.expr()
        token = self.peek()
        if token.kind != "end":
            raise ExprSyntaxError(
                f"Unexpected {self.describe(token)}",
                token.offset,
                ("'+'", "'-'", "'*'", "'/'", "'^'", "end of input"),
            )
        return tree

    def expr(self) -> Expr:
        left = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        token = self.peek()
        if token.kind == "number":
            self.advance()
            return Num(float(token.text))
        if token.kind == "name":
            self.advance()
            if self.peek().text == "(" and self.peek().kind == "op":
                return self.call(token)
            return self.variable(token)
        if token.kind == "op" and token.text == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        raise ExprSyntaxError(
            f"Unexpected {self.describe(token)}", token.offset, ("number", "name", "'('", "'-'")
        )

    def call(self, name_token: _Token) -> Expr:
        name = name_token.text
        if name not in FUNCTION_ARITY:
            raise UnknownIdentifierError(name, name_token.offset, self.declared_names())
        self.expect("(")
        args = [self.expr()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTION_ARITY[name]:
            raise ExprSyntaxError(
                f"Function '{name}' takes {FUNCTION_ARITY[name]} argument(s), got {len(args)}",
                name_token.offset,
            )
        return Call(name, tuple(args))

    def variable(self, token: _Token) -> Expr:
        name = token.text
        if self.variables is not None:
            if name not in self.variables:
                raise UnknownIdentifierError(name, token.offset, self.variables)
        elif not DEFAULT_VARIABLE_PATTERN.match(name):
            raise UnknownIdentifierError(name, token.offset, ("t", "x1..xn", "u1..um"))
        return Var(name)

    def declared_names(self) -> tuple[str, ...]:
        return self.variables if self.variables is not None else ("t", "x1..xn", "u1..um")


def parse(source: str, variables: Optional[Sequence[str]] = None) -> Expr:
    """
    Parses an expression string into an expression tree.

    Args:
        source (str): The expression, e.g. "(u1^2-1)^2 + x1^2".
        variables (Sequence[str], optional): The declared variable names. When
            omitted, any of t, x<k>, u<k> is accepted.
    Returns:
        (Expr): The tree under the grammar's precedence rules.
    Raises:
        (ExprSyntaxError): On malformed input, with byte offset and expected tokens.
        (UnknownIdentifierError): On undeclared variables or unknown functions.
    """
    return _Parser(source, variables).parse()


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

def _precedence(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _POW_PRECEDENCE if e.op == "^" else _PRECEDENCE[e.op]
    if isinstance(e, Neg):
        return _NEG_PRECEDENCE
    return _ATOM_PRECEDENCE


def _wrap(e: Expr, needs_parens: bool) -> str:
    text = to_source(e)
    return f"({text})" if needs_parens else text


def to_source(e: Expr) -> str:
    """
    Prints an expression so that parsing the result yields the same tree.
    """
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _precedence(e.operand) < _NEG_PRECEDENCE)
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_source(arg) for arg in e.args)})"
    if isinstance(e, BinOp):
        if e.op == "^":
            # the exponent slot accepts a unary, so only + - * / need parentheses there
            base = _wrap(e.left, _precedence(e.left) <= _POW_PRECEDENCE)
            exponent = _wrap(e.right, _precedence(e.right) < _NEG_PRECEDENCE)
            return f"{base}^{exponent}"
        own = _PRECEDENCE[e.op]
        left = _wrap(e.left, _precedence(e.left) < own)
        right = _wrap(e.right, _precedence(e.right) <= own)
        return f"{left} {e.op} {right}"
    raise TypeError(f"Not an expression: {e!r}")


def free_variables(e: Expr) -> frozenset[str]:
    """Returns the names of the variables appearing in e."""
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Call):
        names: frozenset[str] = frozenset()
        for arg in e.args:
            names |= free_variables(arg)
        return names
    raise TypeError(f"Not an expression: {e!r}")


# ---------------------------------------------------------------------------
# scalar evaluation
# ---------------------------------------------------------------------------

def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """
    Evaluates an expression in IEEE double arithmetic.

    Raises:
        (UnboundVariableError): If a variable of e has no binding.
        (ExprDomainError): On sqrt of a negative number, division by zero, or a
            negative base raised to a non-integer power.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Neg):
        return -evaluate(e.operand, bindings)
    if isinstance(e, BinOp):
        left = evaluate(e.left, bindings)
        right = evaluate(e.right, bindings)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        if e.op == "/":
            if right == 0.0:
                raise ExprDomainError("Division by zero", to_source(e))
            return left / right
        return _power(left, right, e)
    if isinstance(e, Call):
        values = [evaluate(arg, bindings) for arg in e.args]
        return _call(e, values)
    raise TypeError(f"Not an expression: {e!r}")


def _power(base: float, exponent: float, e: Expr) -> float:
    if base < 0 and not float(exponent).is_integer():
        raise ExprDomainError("Negative base with non-integer exponent", to_source(e))
    if base == 0 and exponent < 0:
        raise ExprDomainError("Division by zero", to_source(e))
    try:
        return math.pow(base, exponent)
    except OverflowError:
        return math.inf


def _call(e: Call, values: list[float]) -> float:
    name = e.name
    if name == "sqrt":
        if values[0] < 0:
            raise ExprDomainError("Square root of a negative number", to_source(e))
        return math.sqrt(values[0])
    if name == "sin":
        return math.sin(values[0])
    if name == "cos":
        return math.cos(values[0])
    if name == "exp":
        try:
            return math.exp(values[0])
        except OverflowError:
            return math.inf
    if name == "abs":
        return abs(values[0])
    if name == "floor":
        return float(math.floor(values[0]))
    if name == "min":
        return min(values[0], values[1])
    if name == "max":
        return max(values[0], values[1])
    raise TypeError(f"Unknown function {name}")


# ---------------------------------------------------------------------------
# vectorised evaluation
# ---------------------------------------------------------------------------

_NUMPY_FUNCTIONS = {
    "sin": "_np.sin",
    "cos": "_np.cos",
    "exp": "_np.exp",
    "sqrt": "_np.sqrt",
    "abs": "_np.abs",
    "floor": "_np.floor",
    "min": "_np.minimum",
    "max": "_np.maximum",
}


def _numpy_source(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        if e.name == "t":
            return "t"
        return f"{e.name[0]}[..., {int(e.name[1:]) - 1}]"
    if isinstance(e, Neg):
        return f"(-{_numpy_source(e.operand)})"
    if isinstance(e, BinOp):
        left = _numpy_source(e.left)
        right = _numpy_source(e.right)
        if e.op == "^":
            return f"_pow({left}, {right})"
        return f"({left} {e.op} {right})"
    if isinstance(e, Call):
        args = ", ".join(_numpy_source(arg) for arg in e.args)
        return f"{_NUMPY_FUNCTIONS[e.name]}({args})"
    raise TypeError(f"Not an expression: {e!r}")


def _vector_power(base, exponent):
    return np.power(np.asarray(base, dtype=float), exponent)


VectorFunction = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def compile_expr(e: Expr) -> VectorFunction:
    """
    Compiles an expression into a numpy function of (t, x, u), where x and u
    carry their components on the last axis. Out-of-domain operations give
    NaN or inf instead of raising; callers check finiteness.

    The result is broadcast to the common shape of t, x[..., 0] and u[..., 0].
    """
    code = compile(f"lambda t, x, u: {_numpy_source(e)}", f"<expr {to_source(e)}>", "eval")
    raw = eval(code, {"_np": np, "_pow": _vector_power, "__builtins__": {}})  # pylint: disable=eval-used

    def vectorized(t, x, u):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        shape = np.broadcast_shapes(t.shape, x.shape[:-1], u.shape[:-1])
        with np.errstate(all="ignore"):
            value = raw(t, x, u)
        return np.broadcast_to(np.asarray(value, dtype=float), shape)

    return vectorized


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

def _add(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return BinOp("*", a, b)


def _neg(a: Expr) -> Expr:
    if a == ZERO:
        return ZERO
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


class _NonSmooth(Exception):
    """Signals that a nonsmooth subtree depends on the differentiation variable."""


def _derivative(e: Expr, var: str) -> Expr:
    if var not in free_variables(e):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Neg):
        return _neg(_derivative(e.operand, var))
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        if e.op == "+":
            return _add(_derivative(a, var), _derivative(b, var))
        if e.op == "-":
            return _sub(_derivative(a, var), _derivative(b, var))
        if e.op == "*":
            return _add(_mul(_derivative(a, var), b), _mul(a, _derivative(b, var)))
        if e.op == "/":
            numerator = _sub(_mul(_derivative(a, var), b), _mul(a, _derivative(b, var)))
            return BinOp("/", numerator, BinOp("^", b, Num(2.0)))
        # power rule; a variable exponent would need a logarithm, which the grammar lacks
        if var in free_variables(b):
            raise _NonSmooth()
        if isinstance(b, Num):
            lowered: Expr = Num(b.value - 1.0) if b.value >= 1.0 else _sub(b, ONE)
        else:
            lowered = _sub(b, ONE)
        return _mul(_mul(b, BinOp("^", a, lowered)), _derivative(a, var))
    if isinstance(e, Call):
        if e.name in NONSMOOTH_FUNCTIONS:
            raise _NonSmooth()
        (a,) = e.args
        inner = _derivative(a, var)
        if e.name == "sin":
            outer: Expr = Call("cos", (a,))
        elif e.name == "cos":
            outer = Neg(Call("sin", (a,)))
        elif e.name == "exp":
            outer = e
        else:  # sqrt
            outer = BinOp("/", ONE, BinOp("*", Num(2.0), e))
        return _mul(outer, inner)
    raise TypeError(f"Not an expression: {e!r}")


def grad(e: Expr, variables: Sequence[str]) -> Gradient:
    """
    Symbolic partial derivatives of e with respect to each listed variable.

    If a floor/abs/min/max subtree (or a variable exponent) involves one of the
    variables, the fallback flag is set and the partials list is empty; use
    finite_difference_gradient in that case.
    """
    try:
        partials = [_derivative(e, var) for var in variables]
    except _NonSmooth:
        return Gradient([], True)
    return Gradient(partials, False)


def finite_difference_gradient(
    e: Expr, bindings: Mapping[str, float], variables: Sequence[str], step: float = FD_STEP
) -> list[float]:
    """Central differences with the given step, the fallback contract of grad."""
    result = []
    for var in variables:
        forward = dict(bindings)
        backward = dict(bindings)
        forward[var] = bindings[var] + step
        backward[var] = bindings[var] - step
        result.append((evaluate(e, forward) - evaluate(e, backward)) / (2.0 * step))
    return result
