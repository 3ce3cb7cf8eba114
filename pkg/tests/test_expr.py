import math

import numpy as np
import pytest

from distcurv.expr import (
    DomainError,
    ParseError,
    UnknownIdentifierError,
    derive,
    evaluate,
    evaluate_many,
    fd_check,
    from_dag,
    parse_expr,
    to_dag,
)


def test_parse_and_evaluate_polynomial():
    assert evaluate(parse_expr("u1 + 2*u2^2"), (1, 1, 0)) == 3


def test_cos_parses_to_function_of_third_coordinate():
    e = parse_expr("cos(u3)")
    assert e.op == "cos"
    assert e.args[0].op == "var" and e.args[0].value == 3


def test_unbalanced_call_reports_offset_and_expected_tokens():
    with pytest.raises(ParseError) as info:
        parse_expr("sin(")
    assert info.value.offset == 4
    assert "'u1'" in info.value.expected


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse_expr("u4 + 1")
    with pytest.raises(UnknownIdentifierError):
        parse_expr("foo(u1)")


@pytest.mark.parametrize("text", ["", "1 +", "(u1", "u1 u2", "2 ^", "1e", "sin u1"])
def test_syntax_errors(text):
    with pytest.raises(ParseError):
        parse_expr(text)


def test_eval_constants():
    assert evaluate(parse_expr("2+2"), (5, -1, 3)) == 4
    assert evaluate(parse_expr("cos(u3)"), (0, 0, 0)) == 1
    assert evaluate(parse_expr("pi"), (0, 0, 0)) == math.pi


def test_division_by_zero_names_subexpression():
    with pytest.raises(DomainError) as info:
        evaluate(parse_expr("1/u1"), (0, 2, 3))
    assert "1/u1" in str(info.value)


@pytest.mark.parametrize("text, point", [("log(u1)", (0, 0, 0)), ("sqrt(u2)", (0, -1, 0)), ("log(-1)", (0, 0, 0))])
def test_domain_errors(text, point):
    with pytest.raises(DomainError):
        evaluate(parse_expr(text), point)


def test_derivatives():
    assert str(derive(parse_expr("cos(u3)"), 3)) == "-sin(u3)"
    assert str(derive(parse_expr("5"), 1)) == "0"
    e = parse_expr("sin(2*u3)")
    assert evaluate(derive(derive(e, 3), 3), (0, 0, math.pi / 4)) == pytest.approx(-4.0, abs=1e-12)


def test_derivative_memoized():
    e = parse_expr("u1*sin(u2)")
    assert derive(e, 2) is derive(e, 2)


def test_structural_sharing():
    assert parse_expr("u1*u2 + 1") is parse_expr(" u1 * u2+1 ")


def test_fd_check_examples():
    sym, fd = fd_check(parse_expr("u1^2"), (3, 0, 0), 1, 1e-4)
    assert sym == 6 and abs(fd - 6) <= 1e-7
    sym, fd = fd_check(parse_expr("exp(u2)"), (0, 1, 0), 2, 1e-4)
    assert sym == pytest.approx(math.e, abs=1e-6) and fd == pytest.approx(math.e, abs=1e-6)
    assert fd_check(parse_expr("7"), (1, 2, 3), 3, 1e-4) == (0.0, 0.0)


def test_fd_check_rejects_bad_step():
    with pytest.raises(ValueError):
        fd_check(parse_expr("u1"), (0, 0, 0), 1, 0.0)


def test_precedence_and_associativity():
    p = (2.0, 3.0, 0.0)
    assert evaluate(parse_expr("2^3^2"), p) == 512
    assert evaluate(parse_expr("-u1^2"), p) == -4
    assert evaluate(parse_expr("u1 - u2 - 1"), p) == -2
    assert evaluate(parse_expr("u2 / u1 / 3"), p) == pytest.approx(0.5)
    assert evaluate(parse_expr("1.5e1 + .5"), p) == 15.5


def test_general_power_lowered_to_exp_log():
    e = parse_expr("u1^u2")
    assert evaluate(e, (2.0, 3.0, 0.0)) == pytest.approx(8.0)
    assert evaluate(derive(e, 2), (2.0, 3.0, 0.0)) == pytest.approx(8.0 * math.log(2.0))
    with pytest.raises(DomainError):
        evaluate(e, (-2.0, 3.0, 0.0))


def test_vectorized_evaluation_matches_pointwise(rng):
    e = parse_expr("atan(u1) + tanh(u2)*cosh(u3) - sinh(u1*u3)/(2 + tan(u2/3))")
    pts = rng.uniform(-1, 1, size=(50, 3))
    vec = evaluate_many([e], pts)[0]
    for p, v in zip(pts, vec):
        assert evaluate(e, p) == v


def test_dag_round_trip():
    e = parse_expr("sin(u1)*sin(u1) + cos(u2)/sin(u1)")
    data = to_dag([e, derive(e, 1)])
    back = from_dag(data)
    assert back[0] is e and back[1] is derive(e, 1)
    assert len(data["nodes"]) < len(str(back[1]))


def test_printer_round_trip_examples():
    for text in ["-u1^2", "(-u1)^2", "u1 - (u2 - u3)", "2/(u1*u2)", "-(u1 + 1)", "1e-3*u1", "exp(-u3)"]:
        e = parse_expr(text)
        again = parse_expr(str(e))
        p = np.array([[0.7, -1.3, 0.4]])
        assert evaluate_many([again], p)[0][0] == pytest.approx(evaluate_many([e], p)[0][0], rel=1e-12)
