# pylint: disable=missing-function-docstring, redefined-outer-name, line-too-long
import numpy as np
import pytest

from relaxgap.ExprLang import (
    FUNCTION_ARITY,
    BinOp,
    Call,
    Expr,
    Neg,
    Num,
    Var,
    compile_expr,
    evaluate,
    finite_difference_gradient,
    free_variables,
    grad,
    parse,
    to_source,
)
from relaxgap.relaxation_errors import (
    ExprDomainError,
    ExprSyntaxError,
    UnboundVariableError,
    UnknownIdentifierError,
)

DOUBLE_WELL = "(u1^2-1)^2 + x1^2"


def random_expr(rng: np.random.Generator, depth: int) -> Expr:
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.5:
            return Num(float(np.round(rng.uniform(0.0, 10.0), int(rng.integers(0, 4)))))
        return Var(str(rng.choice(["t", "x1", "x2", "u1"])))
    choice = rng.integers(0, 3)
    if choice == 0:
        return Neg(random_expr(rng, depth - 1))
    if choice == 1:
        op = str(rng.choice(["+", "-", "*", "/", "^"]))
        return BinOp(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))
    name = str(rng.choice(sorted(FUNCTION_ARITY)))
    return Call(name, tuple(random_expr(rng, depth - 1) for _ in range(FUNCTION_ARITY[name])))


def test_parse_double_well():
    tree = parse(DOUBLE_WELL)
    expected = BinOp(
        "+",
        BinOp("^", BinOp("-", BinOp("^", Var("u1"), Num(2.0)), Num(1.0)), Num(2.0)),
        BinOp("^", Var("x1"), Num(2.0)),
    )
    assert tree == expected


def test_parse_zero_literal():
    assert parse("0") == Num(0.0)


def test_precedence():
    assert parse("-x1^2") == Neg(BinOp("^", Var("x1"), Num(2.0)))
    assert evaluate(parse("2^3^2"), {}) == 512.0
    assert evaluate(parse("1-2-3"), {}) == -4.0
    assert evaluate(parse("8/4/2"), {}) == 1.0
    assert evaluate(parse("2*3+4*5"), {}) == 26.0
    assert evaluate(parse("2^-1"), {}) == 0.5


def test_whitespace_insensitive():
    assert parse("  x1 *( u1 +1 ) ") == parse("x1*(u1+1)")


def test_round_trip_random_trees():
    rng = np.random.default_rng(0)
    for _ in range(150):
        tree = random_expr(rng, 6)
        assert parse(to_source(tree)) == tree, to_source(tree)


@pytest.mark.parametrize(
    "source, offset",
    [
        ("2x1", 1),
        ("(x1", 3),
        ("x1 +", 4),
        ("1 $ 2", 2),
        ("min(x1)", 0),
    ],
)
def test_syntax_errors_report_offset(source, offset):
    with pytest.raises(ExprSyntaxError) as error:
        parse(source)
    assert error.value.offset == offset


def test_syntax_error_offset_counts_bytes():
    # the no-break space is two bytes in UTF-8
    with pytest.raises(ExprSyntaxError) as error:
        parse("\u00a0x1 $")
    assert error.value.offset == 5


def test_syntax_error_lists_expected_tokens():
    with pytest.raises(ExprSyntaxError) as error:
        parse("(x1 + 1")
    assert "')'" in error.value.expected


def test_unknown_identifiers():
    with pytest.raises(UnknownIdentifierError) as error:
        parse("y + 1")
    assert error.value.name == "y"

    with pytest.raises(UnknownIdentifierError) as error:
        parse("x1 + x3", variables=["x1", "x2"])
    assert error.value.declared == ("x1", "x2")
    assert "x1, x2" in str(error.value)

    with pytest.raises(UnknownIdentifierError):
        parse("foo(x1)")


def test_evaluate_examples():
    assert evaluate(parse("min(x1, 2*x1)"), {"x1": -1.0}) == -2.0
    assert evaluate(parse(DOUBLE_WELL), {"x1": 0.0, "u1": 1.0}) == 0.0
    assert evaluate(parse(DOUBLE_WELL), {"x1": 0.0, "u1": 0.0}) == 1.0
    assert evaluate(parse("(-1)^floor(4*t)"), {"t": 0.3}) == -1.0


def test_evaluate_is_deterministic():
    tree = parse("sin(x1)*exp(u1) + sqrt(abs(t))")
    bindings = {"t": 0.37, "x1": -1.2, "u1": 0.4}
    assert evaluate(tree, bindings) == evaluate(tree, dict(bindings))


def test_evaluate_domain_errors():
    with pytest.raises(ExprDomainError) as error:
        evaluate(parse("sqrt(x1)"), {"x1": -1.0})
    assert error.value.subexpression == "sqrt(x1)"
    with pytest.raises(ExprDomainError):
        evaluate(parse("1/x1"), {"x1": 0.0})
    with pytest.raises(ExprDomainError):
        evaluate(parse("x1^0.5"), {"x1": -2.0})


def test_unbound_variable():
    with pytest.raises(UnboundVariableError) as error:
        evaluate(parse("x1 + u1"), {"x1": 1.0})
    assert error.value.name == "u1"


def test_free_variables():
    assert free_variables(parse("x1*u1 + sin(t) + 3")) == frozenset({"x1", "u1", "t"})
    assert free_variables(parse("2")) == frozenset()


def test_compile_matches_scalar_evaluation():
    tree = parse(DOUBLE_WELL + " + t*cos(x1)")
    function = compile_expr(tree)
    rng = np.random.default_rng(1)
    t = rng.uniform(0, 1, 20)
    x = rng.uniform(-2, 2, (20, 1))
    u = rng.uniform(-1, 1, (20, 1))
    values = function(t, x, u)
    for i in range(20):
        assert values[i] == pytest.approx(evaluate(tree, {"t": t[i], "x1": x[i, 0], "u1": u[i, 0]}), rel=1e-12, abs=1e-12)


def test_compile_broadcasts_constants_and_marks_domain_errors():
    zero = compile_expr(parse("0"))
    assert zero(np.zeros(5), np.zeros((5, 1)), np.zeros((5, 1))).shape == (5,)
    root = compile_expr(parse("sqrt(x1)"))
    values = root(np.zeros(2), np.array([[-1.0], [4.0]]), np.zeros((2, 1)))
    assert np.isnan(values[0])
    assert values[1] == 2.0


def test_grad_polynomial():
    (partial,), fallback = grad(parse("x1^2"), ["x1"])
    assert not fallback
    rng = np.random.default_rng(2)
    for x in rng.uniform(-2, 2, 5):
        assert evaluate(partial, {"x1": x}) == pytest.approx(2 * x)


def test_grad_double_well_at_minimum():
    (partial,), fallback = grad(parse(DOUBLE_WELL), ["u1"])
    assert not fallback
    assert evaluate(partial, {"x1": 0.0, "u1": 1.0}) == 0.0


def test_grad_nonsmooth_falls_back():
    partials, fallback = grad(parse("abs(x1)"), ["x1"])
    assert fallback
    assert partials == []
    # a nonsmooth subtree that doesn't involve the variable is fine
    (partial,), fallback = grad(parse("abs(x1) + u1^2"), ["u1"])
    assert not fallback
    assert evaluate(partial, {"x1": 3.0, "u1": 0.5}) == pytest.approx(1.0)


def test_symbolic_gradient_matches_finite_differences():
    tree = parse("sin(x1)*exp(x2) + x1^3/(2 + x2^2) + sqrt(4 + x1^2)")
    partials, fallback = grad(tree, ["x1", "x2"])
    assert not fallback
    rng = np.random.default_rng(3)
    for point in rng.uniform(-2, 2, (20, 2)):
        bindings = {"x1": point[0], "x2": point[1]}
        numeric = finite_difference_gradient(tree, bindings, ["x1", "x2"])
        for symbolic, fd in zip(partials, numeric):
            value = evaluate(symbolic, bindings)
            assert abs(value - fd) <= 1e-5 * max(1.0, abs(value))


def test_finite_differences_on_nonsmooth_expression():
    (slope,) = finite_difference_gradient(parse("abs(x1)"), {"x1": 0.5}, ["x1"])
    assert slope == pytest.approx(1.0)
