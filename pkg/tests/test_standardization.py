"""Standard-chain checking, outer shapes, reordering, and construction."""

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rescal import (
    InvalidTrace,
    NoChainFound,
    Trace,
    alpha_eq,
    factor_outer_inner,
    find_redexes,
    fire_nd,
    is_onf,
    is_standard,
    nd_reducts,
    outer_shape,
    parse_term,
    plug_shape,
    reorder_outer,
    standardize,
    strategy_run,
)
from rescal.syntax import canon_at
from genterms import term_strategy

I = r"\w.w"
# A double application that takes three steps to settle, and a term
# carrying two independent copies of work inside one bag.
N = rf"(\x.\y.x)[!({I})][!({I})]"
M1 = rf"({I})[!({N})]"
M2 = rf"({I})[!({I})]"
BIG = rf"\v.v[!({M1}), !({M2})]"


def fire_to(m, expected):
    """Fire the unique redex-and-addend choice whose result is expected."""
    want = parse_term(expected) if isinstance(expected, str) else expected
    for r in find_redexes(m):
        for local, whole in nd_reducts(m, r):
            if alpha_eq(whole, want):
                return fire_nd(m, r.path, canon_at(local, {}, 0, ignore_labels=True))
    raise AssertionError(f"no single step from {m!r} reaches {want!r}")


def chain(source, *targets):
    """A hand-picked nd trace through the given intermediate terms."""
    initial = parse_term(source)
    m, steps = initial, []
    for t in targets:
        step = fire_to(m, t)
        steps.append(step)
        m = step.after
    return Trace(initial, tuple(steps), "nd", final=m)


# ----------------------------------------------------------------- checking


def test_trivial_traces_are_standard():
    m = parse_term(rf"({I})[z]")
    empty = Trace(m, (), "nd", final=m)
    assert is_standard(empty).standard
    (t,) = strategy_run(m, "nd", "leftmost")
    assert len(t.steps) == 1 and is_standard(t).standard


def test_leftmost_run_is_standard():
    (t,) = strategy_run(parse_term(M1), "nd", "leftmost")
    assert len(t.steps) == 3
    assert alpha_eq(t.final, parse_term(I)) and is_onf(t.final)
    rep = is_standard(t)
    assert rep.standard and rep.violation is None


def test_interleaving_across_bag_elements_is_standard():
    t = chain(
        BIG,
        rf"\v.v[!({N}), !({M2})]",
        rf"\v.v[!({N}), !({I})]",
        rf"\v.v[!((\y.{I})[!({I})]), !({I})]",
        rf"\v.v[!({I}), !({I})]",
    )
    rep = is_standard(t)
    assert rep.standard and rep.violation is None


def test_inner_then_outer_chain_is_flagged():
    t = chain(
        M1,
        rf"({I})[!((\y.{I})[!({I})])]",
        rf"(\y.{I})[!({I})]",
    )
    rep = is_standard(t)
    assert not rep.standard
    index, prior, fired = rep.violation
    assert index == 1
    assert prior == ()
    assert fired == ("arg", ("elem", 0), "content", "fun")


def test_argument_before_function_side_is_flagged():
    m = rf"f[({I})[a]][({I})[b]]"
    t = chain(m, rf"f[({I})[a]][b]", r"f[a][b]")
    rep = is_standard(t)
    assert not rep.standard
    index, prior, fired = rep.violation
    assert index == 1
    assert prior == ("fun", "arg", ("elem", 0), "content")
    assert fired == ("arg", ("elem", 0), "content")


def test_function_before_argument_side_is_standard():
    m = rf"f[({I})[a]][({I})[b]]"
    t = chain(m, rf"f[a][({I})[b]]", r"f[a][b]")
    assert is_standard(t).standard


def test_standardness_needs_an_nd_trace():
    (t,) = strategy_run(parse_term(rf"({I})[a]"), "giant", "leftmost")
    with pytest.raises(InvalidTrace):
        is_standard(t)


# -------------------------------------------------------------- outer shape


def test_outer_shape_plug_inverse():
    for src in ("x", r"\x.x[!y]", r"x[!a, y[!c]][d]", r"x[!(y[!z])]", BIG):
        m = parse_term(src)
        assert plug_shape(outer_shape(m)) == m


def test_outer_shape_hole_per_outermost_reusable():
    shape = outer_shape(parse_term(r"x[!a, y[!c]][d]"))
    assert len(shape.holes) == 2
    got = sorted(site.content.canon() for site in shape.holes)
    want = sorted(parse_term(s).canon() for s in ("a", "c"))
    assert got == want


def test_outer_shape_stops_at_outermost_bang():
    m = parse_term(r"x[!(y[!z])]")
    shape = outer_shape(m)
    assert len(shape.holes) == 1
    assert shape.holes[0].content == parse_term(r"y[!z]")
    assert plug_shape(shape) == m


def test_inner_step_preserves_the_skeleton():
    m = parse_term(rf"x[!(({I})[a]), b]")
    (r,) = [r for r in find_redexes(m) if not r.outer]
    ((_, whole),) = nd_reducts(m, r)
    assert outer_shape(whole).skeleton == outer_shape(m).skeleton


# ------------------------------------------------------------ factorization


def test_factor_outer_inner_splits_phases():
    m = rf"x[({I})[b], !(({I})[a])]"
    t = chain(m, rf"x[({I})[b], !a]", r"x[b, !a]")
    outs, ins = factor_outer_inner(t)
    assert outs.initial == t.initial
    assert outs.final == ins.initial
    assert ins.final == t.final
    assert all(s.redex.outer for s in outs.steps)
    assert all(not s.redex.outer for s in ins.steps)
    assert len(outs.steps) + len(ins.steps) == 2


def test_factor_keeps_an_outer_chain_whole():
    (t,) = strategy_run(parse_term(rf"({I})[({I})[a]]"), "nd", "leftmost")
    outs, ins = factor_outer_inner(t)
    assert not ins.steps
    assert outs.final == t.final
    assert all(s.redex.outer for s in outs.steps)


# --------------------------------------------------------------- reordering


def test_reorder_outer_puts_leftmost_first():
    m = rf"({I})[a][({I})[b]]"
    t = chain(m, rf"({I})[a][b]", r"a[b]")
    assert not t.steps[0].redex.leftmost
    r = reorder_outer(t)
    assert r.initial == t.initial and r.final == t.final
    assert len(r.steps) == 2
    assert r.steps[0].redex.leftmost
    assert is_standard(r).standard


def test_reorder_outer_rejects_inner_steps():
    t = chain(rf"x[!(({I})[a])]", r"x[!a]")
    with pytest.raises(InvalidTrace):
        reorder_outer(t)


# ------------------------------------------------------------- construction


def test_standardize_reaches_the_endpoints():
    m, n = parse_term(M1), parse_term(I)
    t = standardize(m, n)
    assert t.initial == m and alpha_eq(t.final, n)
    assert len(t.steps) == 3
    assert is_standard(t).standard


def test_standardize_handles_parallel_bag_elements():
    m = parse_term(BIG)
    n = parse_term(rf"\v.v[!({I}), !({I})]")
    t = standardize(m, n)
    assert t.initial == m and alpha_eq(t.final, n)
    assert len(t.steps) == 4
    assert is_standard(t).standard


def test_standardize_trivial_when_endpoints_equal():
    m = parse_term(rf"({I})[a]")
    t = standardize(m, m)
    assert t.steps == () and t.final == m


def test_standardize_unreachable_raises():
    with pytest.raises(NoChainFound):
        standardize(parse_term("x"), parse_term("y"), bound=3)


@given(term_strategy(max_size=6, frees=("x", "y"), redex_bias=0.9), st.integers(0, 2**16))
def test_standardize_connects_any_reachable_pair(m, seed):
    rng = random.Random(seed)
    cur = m
    for _ in range(2):
        pairs = [p for r in find_redexes(cur) for p in nd_reducts(cur, r)]
        if not pairs:
            break
        _, cur = rng.choice(pairs)
    t = standardize(m, cur, bound=2)
    assert t.initial == m and t.final == cur
    assert is_standard(t).standard
