"""Recurrence iteration, convergence classification, fixed points, squeeze."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fesqueeze.errors import (
    AmbiguousFixedPointError,
    NoSatisfyingFixedPointError,
    NonFiniteError,
    NotBracketingError,
    TraceNotConvergedError,
)
from fesqueeze.sequences import (
    Recurrence,
    classify,
    fixed_points,
    iterate,
    select_fixed_point,
    squeeze,
)

BOUNDING_MAP = "2 - 4/(a+3)"


def test_exact_rational_trace():
    trace = iterate(Recurrence.single(BOUNDING_MAP, 2), 6)
    vals = trace.values("a")
    assert vals[0] == Fraction(2) and isinstance(vals[0], Fraction)
    assert vals[1] == Fraction(6, 5)
    assert vals[2] == Fraction(22, 21)


def test_classify_converged_decreasing_to_one():
    trace = iterate(Recurrence.single(BOUNDING_MAP, 2), 60)
    report = classify(trace)
    assert report.classification == "converged"
    assert report.direction == "decreasing"
    assert report.limit == pytest.approx(1.0, abs=1e-8)


def test_classify_monotone_unbounded():
    trace = iterate(Recurrence.single("a + 1", 0), 30)
    report = classify(trace)
    assert report.classification == "monotone-unbounded"
    assert report.direction == "increasing"
    assert report.limit is None


def test_classify_oscillating():
    trace = iterate(Recurrence.single("1 - a", 0), 30)
    report = classify(trace)
    assert report.classification == "oscillating"


@given(st.fractions(min_value=Fraction(-9, 10), max_value=Fraction(9, 10)).filter(bool))
@settings(max_examples=40, deadline=None)
def test_linear_contractions_converge_to_zero(q):
    rec = Recurrence.single(f"({q.numerator}/{q.denominator}) * a", 1)
    report = classify(iterate(rec, 400))
    assert report.classification == "converged"
    assert report.limit == pytest.approx(0.0, abs=1e-8)


def test_exact_arithmetic_demotes_to_float_when_huge():
    # Newton-style map whose denominators square every step
    rec = Recurrence.single("(a + 1/a) / 2", 3)
    trace = iterate(rec, 20)
    vals = trace.values("a")
    assert isinstance(vals[1], Fraction)
    assert isinstance(vals[-1], float)
    assert classify(trace).limit == pytest.approx(1.0, abs=1e-10)


def test_divergence_raises_non_finite():
    with pytest.raises(NonFiniteError):
        iterate(Recurrence.single("a * a", 2), 40)


def test_fixed_points_of_bounding_map():
    fps = fixed_points(BOUNDING_MAP, (-10, 10))
    assert [round(v, 6) for v in sorted(fps.values)] == [-2.0, 1.0]
    for root in fps.roots:
        assert abs(root.residual) <= 1e-9
    # the pole at a = -3 must not masquerade as a root
    assert all(abs(v + 3) > 0.5 for v in fps.values)


def test_fixed_points_degenerate_identity():
    fps = fixed_points("a", (-1, 1))
    assert fps.degenerate


def test_select_fixed_point_constraints():
    fps = fixed_points(BOUNDING_MAP, (-10, 10))
    assert select_fixed_point(fps, lambda v: v > 0) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(AmbiguousFixedPointError):
        select_fixed_point(fps, lambda v: v < 5)
    with pytest.raises(NoSatisfyingFixedPointError):
        select_fixed_point(fps, lambda v: v > 10)


def test_coupled_trace_and_squeeze():
    rec = Recurrence.coupled("(b + 2)/b", "(a + 2)/a", 1, 3)
    trace = iterate(rec, 80)
    a_vals = trace.values("a")
    b_vals = trace.values("b")
    assert a_vals[:2] == [Fraction(1), Fraction(5, 3)]
    assert b_vals[:2] == [Fraction(3), Fraction(3)]
    limit = squeeze(trace.component("a"), trace.component("b"))
    assert limit == pytest.approx(2.0, abs=1e-8)


def test_squeeze_rejects_non_bracketing_pair():
    above = iterate(Recurrence.single(BOUNDING_MAP, 2), 10)  # stays >= 1
    below = iterate(Recurrence.single("a/2", 1), 10)  # drops toward 0
    with pytest.raises(NotBracketingError):
        squeeze(above.component("a"), below.component("a"))


def test_squeeze_requires_convergence():
    low = iterate(Recurrence.single("a + 1", 0), 10)
    high = iterate(Recurrence.single("a + 2", 0), 10)
    with pytest.raises(TraceNotConvergedError):
        squeeze(low.component("a"), high.component("a"))


def test_iterate_validates_length():
    with pytest.raises(ValueError):
        iterate(Recurrence.single("a", 1), 0)
