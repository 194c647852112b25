"""Concrete syntax: grammar coverage, printing, round trips."""

import pytest
from hypothesis import given

from rescal import (
    Abs,
    App,
    Bag,
    Linear,
    ParseError,
    Reusable,
    Sum,
    Var,
    ZERO,
    alpha_eq,
    parse_lambda_term,
    parse_sum,
    parse_term,
    print_expr,
)
from rescal.syntax import LamAbs, LamApp, LamVar
from genterms import term_strategy


def test_parse_abstraction_over_reusable_bag():
    t = parse_term(r"\x. x [!x]")
    assert isinstance(t, Abs) and isinstance(t.body, App)
    bag = t.body.arg
    assert isinstance(bag.elements[0], Reusable) and bag.elements[0].content == Var("x")


def test_parse_two_addend_sum():
    s = parse_sum("y [F] [I] + y [I] [F]")
    assert isinstance(s, Sum) and s.total() == 2 and len(s.addends) == 2


def test_parse_empty_bag_application():
    t = parse_term(r"(\x.x) 1")
    assert isinstance(t, App) and t.arg == Bag(())


def test_parse_zero():
    assert parse_sum("0") == ZERO


def test_parse_bracket_empty_bag():
    assert parse_term("x[]").arg == Bag(())


def test_multi_binder_sugar():
    assert alpha_eq(parse_term(r"\x y.y[x]"), parse_term(r"\x.\y.y[x]"))


def test_lambda_unicode_synonym():
    assert alpha_eq(parse_term("λx.x"), parse_term(r"\x.x"))


def test_abstraction_body_extends_right():
    t = parse_term(r"\x.x[y][z]")
    assert isinstance(t, Abs) and isinstance(t.body, App)


def test_application_left_associative():
    t = parse_term("x[y][z]")
    assert isinstance(t.fun, App) and t.fun.fun == Var("x")


def test_whitespace_insensitive():
    assert parse_term(" x [ y ,  ! z ] ") == parse_term("x[y,!z]")


def test_print_identity():
    assert print_expr(parse_term(r"\x.x")) == r"\x.x"


def test_print_empty_bag():
    assert print_expr(parse_term(r"(\x.x) 1")) == r"(\x.x)1"


def test_print_zero():
    assert print_expr(ZERO) == "0"


def test_parse_error_reports_span_and_expectation():
    with pytest.raises(ParseError) as e:
        parse_term("x[")
    assert e.value.span is not None


@pytest.mark.parametrize("bad", ["", "x +", "[x]", "\\.x", "x[!]", "(x", "x)"])
def test_parse_error_on_malformed(bad):
    with pytest.raises(ParseError):
        parse_sum(bad)


def test_parse_lambda_term():
    t = parse_lambda_term(r"(\x.x x) y")
    assert t == LamApp(LamAbs("x", LamApp(LamVar("x"), LamVar("x"))), LamVar("y"))


@given(term_strategy(max_size=10))
def test_round_trip_terms(t):
    assert alpha_eq(parse_term(print_expr(t)), t)


@given(term_strategy(max_size=7), term_strategy(max_size=7))
def test_round_trip_sums(a, b):
    s = Sum.of(a) + Sum.of(b) + Sum.of(a)
    assert alpha_eq(parse_sum(print_expr(s)), s)


@given(term_strategy(max_size=8))
def test_printer_deterministic_on_alpha_class(t):
    relabelled = parse_term(print_expr(t))
    assert print_expr(relabelled) == print_expr(t)
