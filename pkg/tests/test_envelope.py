"""Linear envelope derivation and refinement against hand-derived maps."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fesqueeze.envelope import (
    LinearEnvelope,
    derive_envelope_recurrence,
    refine,
    user_envelope_recurrence,
    validate_envelope,
)
from fesqueeze.errors import (
    ExpressionSyntaxError,
    OrderViolationError,
    UnknownSymbolError,
    UnsupportedShapeError,
)
from fesqueeze.expr import parse_relation
from fesqueeze.gridfn import Grid, GridFunction
from fesqueeze.sequences import fixed_points, select_fixed_point

NESTED = parse_relation("f(x) + f(f(x)) = 2*x")
SHIFTED = parse_relation("f(f(x) - x) = 2*x", domain="R0+")

_rational_pairs = st.tuples(
    st.fractions(min_value=0, max_value=3),
    st.fractions(min_value=Fraction(1, 10), max_value=4),
).filter(lambda ab: ab[0] <= ab[1])


@given(_rational_pairs)
@settings(max_examples=60)
def test_nested_relation_maps_match_closed_form(ab):
    a, b = ab
    rec = derive_envelope_recurrence(NESTED)
    new_a, new_b = rec.step(a, b)
    assert new_a == Fraction(2) / (b + 1)
    assert new_b == Fraction(2) / (a + 1)


_shifted_pairs = st.tuples(
    st.fractions(min_value=1, max_value=3),
    st.fractions(min_value=1, max_value=4),
).filter(lambda ab: ab[0] <= ab[1])


@given(_shifted_pairs)
@settings(max_examples=60)
def test_shifted_relation_maps_match_closed_form(ab):
    # the inner argument f(x)-x is provably nonnegative only once a >= 1
    a, b = ab
    rec = derive_envelope_recurrence(SHIFTED)
    new_a, new_b = rec.step(a, b)
    assert new_a == (b + 2) / b
    assert new_b == (a + 2) / a


def test_shifted_relation_step_refuses_indeterminate_sign():
    rec = derive_envelope_recurrence(SHIFTED)
    with pytest.raises(UnsupportedShapeError):
        rec.step(Fraction(1, 2), Fraction(2))


def test_exact_early_terms_nested():
    rec = derive_envelope_recurrence(NESTED)
    trace = refine(rec, LinearEnvelope(0, 2))
    assert trace.envelopes[1].a == Fraction(2, 3)
    assert trace.envelopes[2].b == Fraction(6, 5)


def test_exact_early_terms_shifted():
    rec = derive_envelope_recurrence(SHIFTED)
    trace = refine(rec, LinearEnvelope(1, 3))
    assert trace.envelopes[1].a == Fraction(5, 3)
    assert trace.envelopes[1].b == Fraction(3)


def test_collapse_to_known_slopes():
    trace1 = refine(derive_envelope_recurrence(NESTED), LinearEnvelope(0, 2), tol=1e-10)
    assert trace1.collapsed and trace1.c == pytest.approx(1.0, abs=1e-8)
    trace2 = refine(derive_envelope_recurrence(SHIFTED), LinearEnvelope(1, 3), tol=1e-10)
    assert trace2.collapsed and trace2.c == pytest.approx(2.0, abs=1e-8)


def test_collapse_point_is_fixed_point_of_both_maps():
    for rel, init, window in ((NESTED, (0, 2), (0.1, 5)), (SHIFTED, (1, 3), (1.1, 5))):
        rec = derive_envelope_recurrence(rel)
        trace = refine(rec, LinearEnvelope(*init), tol=1e-10)
        for map_ in (lambda t: rec.lower_map(t, t), lambda t: rec.upper_map(t, t)):
            fps = fixed_points(map_, window)
            root = select_fixed_point(fps, lambda v: abs(v - trace.c) < 0.5)
            assert root == pytest.approx(trace.c, abs=1e-8)


def test_widths_are_monotone_under_trapping_maps():
    trace = refine(derive_envelope_recurrence(NESTED), LinearEnvelope(0, 2))
    widths = trace.widths()
    assert all(w2 <= w1 + 1e-15 for w1, w2 in zip(widths, widths[1:]))
    assert trace.trap_violations == ()


def test_unsupported_shapes_are_rejected():
    cases = [
        "f(x*y + f(x)) = f(x)*f(y) + x",  # second variable
        "f(x) * f(f(x)) = 2*x",  # product of two f-terms
        "f(x)^2 = x",  # square of the unknown bound
        "f(x) + x >= 1",  # inequality
    ]
    for text in cases:
        with pytest.raises(UnsupportedShapeError):
            derive_envelope_recurrence(parse_relation(text))


def test_user_maps_drive_refinement():
    rec = user_envelope_recurrence("2/(b + 1)", "2/(a + 1)")
    trace = refine(rec, LinearEnvelope(0, 2))
    assert trace.collapsed and trace.c == pytest.approx(1.0, abs=1e-8)
    assert rec.origin == "user-supplied"


def test_user_map_parse_errors():
    with pytest.raises(UnknownSymbolError):
        user_envelope_recurrence("2/(q + 1)", "2")
    with pytest.raises(ExpressionSyntaxError):
        user_envelope_recurrence("2/(b + ", "2")


def test_order_violation_detected():
    rec = user_envelope_recurrence("b + 1", "a - 1")
    with pytest.raises(OrderViolationError):
        refine(rec, LinearEnvelope(1, 2))


def test_trap_violations_recorded_not_fatal():
    rec = user_envelope_recurrence("a/2", "b*2")
    trace = refine(rec, LinearEnvelope(1, 2), max_iter=12)
    assert trace.status in ("max-iterations", "stalled")
    assert trace.trap_violations
    assert 1 in trace.trap_violations


def test_envelope_construction_guards():
    with pytest.raises(OrderViolationError):
        LinearEnvelope(2, 1)
    with pytest.raises(OrderViolationError):
        LinearEnvelope(0, 0)  # upper slope must be positive
    with pytest.raises(OrderViolationError):
        LinearEnvelope(0, float("inf"))
    env = LinearEnvelope(Fraction(1, 3), Fraction(1, 2), lower_strict=True)
    assert env.width == Fraction(1, 6)
    assert env.midpoint == pytest.approx(float(Fraction(5, 12)))
    assert env.lower_strict and not env.upper_strict


def test_validate_envelope_against_grid_function():
    grid = Grid.log(1e-2, 1e2, 64)
    gf = GridFunction.from_callable(grid, lambda t: t)
    good = validate_envelope(LinearEnvelope(Fraction(1, 2), 2), gf)
    assert good.valid and good.min_lower_slack >= 0 and good.min_upper_slack >= 0
    bad = validate_envelope(LinearEnvelope(Fraction(6, 5), 2), gf)
    assert not bad.valid and bad.min_lower_slack < 0
