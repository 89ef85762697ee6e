"""Grid functions: interpolation, solving, sup/inf, witnesses, limits."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fesqueeze.errors import (
    BoundaryPointError,
    EvaluationDomainError,
    NonFiniteError,
    NotMonotoneNearPointError,
    NotSolvableForPivotError,
    SolveDivergedError,
)
from fesqueeze.expr import parse_relation, unparse
from fesqueeze.gridfn import (
    Grid,
    GridFunction,
    differential_residual,
    isolate_pivot,
    limit_at_zero,
    one_sided_limit,
    ratio_limit_at_zero,
    solve_fixed_point,
    sup_inf,
    sup_witness_sequence,
    tail_ratio,
)

NESTED = parse_relation("f(x) + f(f(x)) = 2*x")
SHIFTED = parse_relation("f(f(x) - x) = 2*x", domain="R0+")


# ---------------------------------------------------------------------------
# grids and interpolation


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(np.linspace(1, 2, 8), "linear")  # too few points
    with pytest.raises(ValueError):
        Grid(np.array([1.0] * 20), "linear")  # not strictly increasing
    with pytest.raises(ValueError):
        Grid(np.linspace(-1, 1, 32), "log")  # log grids must be positive
    with pytest.raises(ValueError):
        Grid.log(0.0, 10.0)
    assert len(Grid.log(1e-3, 1e3, 64)) == 64
    assert Grid.symmetric(5.0, 32).points[0] == -5.0


def test_grid_function_validation():
    grid = Grid.log(1e-2, 1e2, 32)
    with pytest.raises(NonFiniteError):
        GridFunction(grid, np.full(32, np.nan))
    with pytest.raises(EvaluationDomainError):
        GridFunction(grid, np.linspace(-1, 1, 32))  # not positive on a log grid
    with pytest.raises(ValueError):
        GridFunction(grid, np.ones(31))
    linear = Grid.linear(-1, 1, 32)
    GridFunction(linear, np.linspace(-1, 1, 32))  # signs fine off the log scale


def test_grid_function_arrays_are_frozen():
    gf = GridFunction.from_callable(Grid.log(1e-2, 1e2, 32), lambda t: t)
    with pytest.raises(ValueError):
        gf.values[0] = 99.0
    with pytest.raises(ValueError):
        gf.grid.points[0] = 99.0


def test_power_laws_interpolate_exactly_on_log_grids():
    grid = Grid.log(1e-3, 1e3, 128)
    gf = GridFunction.from_callable(grid, lambda t: t**1.7)
    for q in (0.0123, 1.0, 17.3, 456.0):
        assert gf(q) == pytest.approx(q**1.7, rel=1e-12)


def test_vector_queries_return_plain_arrays():
    grid = Grid.log(1e-2, 1e2, 64)
    gf = GridFunction.from_callable(grid, lambda t: 2.0 * t)
    qs = np.array([0.5, 1.0, 7.0])
    vals = gf(qs)
    assert isinstance(vals, np.ndarray) and vals.shape == qs.shape
    assert vals == pytest.approx(2.0 * qs, rel=1e-12)
    inv = gf.inverse(2.0 * qs)
    assert isinstance(inv, np.ndarray)
    assert inv == pytest.approx(qs, rel=1e-12)
    ders = gf.derivative(qs)
    assert isinstance(ders, np.ndarray)
    assert ders == pytest.approx(2.0, rel=1e-9)


def test_extrapolation_beyond_grid_edges():
    grid = Grid.log(1e-2, 1e2, 64)
    gf = GridFunction.from_callable(grid, lambda t: 3.0 * t)
    assert gf(1e-3) == pytest.approx(3e-3, rel=1e-9)
    assert gf(1e3) == pytest.approx(3e3, rel=1e-9)


def test_derivative_of_square_near_interior_point():
    grid = Grid.log(1e-2, 1e2, 512)
    gf = GridFunction.from_callable(grid, lambda t: t * t)
    assert gf.derivative(2.0) == pytest.approx(4.0, rel=1e-4)
    with pytest.raises(BoundaryPointError):
        gf.derivative(float(grid.points[0]))


def test_inverse_interpolation():
    grid = Grid.log(1e-2, 1e2, 128)
    gf = GridFunction.from_callable(grid, lambda t: 2.0 * t)
    assert gf.inverse(10.0) == pytest.approx(5.0, rel=1e-9)


def test_csv_round_trip_preserves_doubles(tmp_path):
    grid = Grid.log(1e-3, 1e3, 32)
    gf = GridFunction.from_callable(grid, lambda t: t / 3.0 + 1e-7)
    path = tmp_path / "gf.csv"
    gf.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "x,f"
    back = GridFunction.from_csv(path, kind="log")
    assert np.array_equal(back.values, gf.values)
    assert np.array_equal(back.grid.points, gf.grid.points)


# ---------------------------------------------------------------------------
# pivot isolation and the solver


def test_isolate_pivot_forms():
    assert unparse(isolate_pivot(NESTED, 0)) == "2*x-f(f(x))"
    assert unparse(isolate_pivot(NESTED, 1)) == "finv(2*x-f(x))"
    assert unparse(isolate_pivot(SHIFTED, 0)) == "finv(2*x)+x"


def test_isolate_pivot_errors():
    with pytest.raises(NotSolvableForPivotError):
        isolate_pivot(NESTED, 5)  # out of range
    with pytest.raises(NotSolvableForPivotError):
        isolate_pivot(parse_relation("f(x + y) >= 1"))  # inequality
    with pytest.raises(NotSolvableForPivotError):
        isolate_pivot(parse_relation("f(x) + f'(f(x)) = x"), 1)  # under derivative


def test_solver_converges_immediately_from_the_solution():
    grid = Grid.log(1e-3, 1e3, 512)
    gf, report = solve_fixed_point(NESTED, grid, init="x", damping=0.5)
    assert report.converged
    assert report.iterations <= 2
    dev = np.abs(gf.values - grid.points) / grid.points
    assert float(dev.max()) <= 1e-9


def test_solver_finds_shifted_solution_from_identity():
    grid = Grid.log(1e-3, 1e3, 512)
    gf, report = solve_fixed_point(SHIFTED, grid, damping=0.5)
    assert report.converged
    n = len(grid)
    cut = max(1, int(0.05 * n))
    dev = np.abs(gf.values - 2.0 * grid.points) / (2.0 * grid.points)
    assert float(dev[cut : n - cut].max()) <= 1e-6


def test_solver_raises_on_numeric_blowup():
    # f = T(f) with T(f) = f^2/x doubles log-magnitude each sweep; the iterate
    # leaves the finite reals and the solver must say so rather than freeze.
    rel = parse_relation("f(x)^2 = x*f(x)")
    grid = Grid.log(1e-1, 1e1, 32)
    with pytest.raises(SolveDivergedError):
        solve_fixed_point(rel, grid, init="2*x", pivot=1, damping=1.0)


def test_solver_reports_non_convergence_of_linear_repeller():
    # T(f) = 4f - x pushes any non-solution away at rate 3 but never overflows
    # within max_iter, so the report is an honest converged=False.
    rel = parse_relation("4*f(x) - x = f(x)")
    grid = Grid.log(1e-1, 1e1, 32)
    _, report = solve_fixed_point(rel, grid, pivot=1, damping=1.0, max_iter=40)
    assert not report.converged
    assert report.iterations == 40


def test_solver_damping_validation():
    with pytest.raises(ValueError):
        solve_fixed_point(NESTED, Grid.log(1, 10, 16), damping=0.0)
    with pytest.raises(ValueError):
        solve_fixed_point(NESTED, Grid.log(1, 10, 16), damping=1.5)


# ---------------------------------------------------------------------------
# sup/inf and witness sequences


def test_sup_inf_plain_and_windowed():
    grid = Grid.log(1e-2, 1e2, 64)
    gf = GridFunction.from_callable(grid, lambda t: t)
    rep = sup_inf(gf)
    assert rep.S == pytest.approx(100.0) and rep.I == pytest.approx(0.01)
    assert rep.arg_S == pytest.approx(100.0) and rep.arg_I == pytest.approx(0.01)
    windowed = sup_inf(gf, window=(1.0, 10.0))
    assert windowed.S <= 10.0 + 1e-9 and windowed.I >= 1.0 - 1e-9
    assert windowed.window == (1.0, 10.0)


def test_sup_inf_of_ratio():
    grid = Grid.log(1e-2, 1e2, 64)
    gf = GridFunction.from_callable(grid, lambda t: 2.0 * t)
    rep = sup_inf(gf, of="f/x")
    assert rep.S == pytest.approx(2.0) and rep.I == pytest.approx(2.0)


def test_witness_sequence_on_constant_function():
    grid = Grid.log(1e-2, 1e2, 64)
    gf = GridFunction.from_callable(grid, lambda t: 5.0)
    wit = sup_witness_sequence(gf, count=6)
    assert all(fx == pytest.approx(5.0) for _, fx in wit.points)


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_witness_values_climb_within_schedule(seed):
    rng = np.random.default_rng(seed)
    grid = Grid.log(1e-2, 1e2, 96)
    gf = GridFunction(grid, rng.uniform(0.5, 10.0, 96))
    wit = sup_witness_sequence(gf, count=10)
    values = [fx for _, fx in wit.points]
    assert all(v2 >= v1 - 1e-12 for v1, v2 in zip(values, values[1:]))
    for v, eps in zip(values, wit.epsilons):
        assert v >= wit.sup - eps - 1e-12 * abs(wit.sup)


# ---------------------------------------------------------------------------
# one-sided limits and tails


def _jump(t: float) -> float:
    return t if t < 1.0 else t + 1.0


def test_one_sided_limits_at_a_jump():
    grid = Grid.linear(0.0, 2.0, 512)
    gf = GridFunction.from_callable(grid, _jump)
    left = one_sided_limit(gf, 1.0, "left")
    right = one_sided_limit(gf, 1.0, "right")
    step = 2.0 / 511
    assert abs(left.value - 1.0) <= 2 * step
    assert abs(right.value - 2.0) <= 2 * step
    # _jump is increasing on both sides of the discontinuity
    assert left.direction == "increasing" and right.direction == "increasing"
    assert left.monotone_consistent and right.monotone_consistent


def test_one_sided_limit_of_identity_is_exact():
    grid = Grid.log(1e-2, 1e2, 256)
    gf = GridFunction.from_callable(grid, lambda t: t)
    est = one_sided_limit(gf, 1.0, "right")
    assert est.value == pytest.approx(1.0, abs=1e-9)
    assert est.uncertainty <= 1e-9


def test_one_sided_limit_requires_local_monotonicity():
    grid = Grid.linear(0.0, 2.0, 256)
    gf = GridFunction(grid, np.sin(20.0 * grid.points) + 2.0)
    with pytest.raises(NotMonotoneNearPointError):
        one_sided_limit(gf, 1.0, "right")


def test_one_sided_limit_boundary_errors():
    grid = Grid.log(1e-2, 1e2, 64)
    gf = GridFunction.from_callable(grid, lambda t: t)
    with pytest.raises(BoundaryPointError):
        one_sided_limit(gf, float(grid.points[0]), "left")
    with pytest.raises(BoundaryPointError):
        one_sided_limit(gf, float(grid.points[-1]) * 2, "right")


def test_limits_at_zero_and_tails():
    grid = Grid.log(1e-3, 1e3, 512)
    ident = GridFunction.from_callable(grid, lambda t: t)
    shifted = GridFunction.from_callable(grid, lambda t: t + 1.0)
    doubled = GridFunction.from_callable(grid, lambda t: 2.0 * t)
    assert limit_at_zero(ident).value == pytest.approx(0.0, abs=1e-3)
    assert limit_at_zero(shifted).value == pytest.approx(1.0, abs=1e-3)
    assert ratio_limit_at_zero(ident).value == pytest.approx(1.0, abs=1e-3)
    assert tail_ratio(ident).value == pytest.approx(1.0, abs=1e-3)
    assert tail_ratio(doubled).value == pytest.approx(0.5, abs=1e-3)


def test_diverging_ratio_is_flagged_unbounded():
    grid = Grid.log(1e-3, 1e3, 512)
    shifted = GridFunction.from_callable(grid, lambda t: t + 1.0)
    est = ratio_limit_at_zero(shifted)
    assert est.unbounded and est.value == float("inf")
    recip = GridFunction.from_callable(grid, lambda t: 1.0 / t)
    assert limit_at_zero(recip).unbounded


def test_limit_helpers_require_log_grids():
    gf = GridFunction.from_callable(Grid.linear(0.0, 2.0, 64), lambda t: t + 1.0)
    with pytest.raises(EvaluationDomainError):
        limit_at_zero(gf)
    with pytest.raises(EvaluationDomainError):
        tail_ratio(gf)


# ---------------------------------------------------------------------------
# differential residuals


def test_differential_residual_for_known_solutions():
    ode = parse_relation("f'(x) * f(x)^3 = x^3")
    grid = Grid.log(1e-3, 1e3, 512)
    ident = GridFunction.from_callable(grid, lambda t: t)
    rep = differential_residual(ode, ident, grid)
    assert rep.max_residual <= 1e-6

    halving = parse_relation("f(x) = f(x/2) + f'(x) * x / 2", domain="R")
    lin = Grid.linear(-100.0, 100.0, 512)
    for c, d in ((1.0, 0.0), (2.0, -3.0)):
        gf = GridFunction.from_callable(lin, lambda t: c * t + d)
        rep = differential_residual(halving, gf, lin)
        assert rep.max_residual <= 1e-8


def test_differential_residual_flags_wrong_candidate():
    ode = parse_relation("f'(x) * f(x)^3 = x^3")
    grid = Grid.log(1e-3, 1e3, 256)
    wrong = GridFunction.from_callable(grid, lambda t: 2.0 * t)
    rep = differential_residual(ode, wrong, grid)
    assert rep.max_residual > 1e-2


def test_inequality_residual_measures_violation_only():
    ge = parse_relation("f(x + y) + f(x + z) - f(x)*f(y + z) >= 1")
    grid = Grid.log(1e-2, 1e2, 128)
    ones = GridFunction.from_callable(grid, lambda t: 1.0)
    rep = differential_residual(ge, ones, grid)
    assert rep.max_residual == pytest.approx(0.0, abs=1e-12)
