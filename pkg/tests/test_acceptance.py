"""Acceptance gate: eleven end-to-end checks with pinned tolerances.

Run ``pytest tests/test_acceptance.py -v`` to get exactly one PASSED/FAILED
line per criterion.  Each test states its tolerance inline; timing bounds
use wall-clock time around the work being measured.
"""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np
import pytest

from fesqueeze.corpus import problem_grid, run_all
from fesqueeze.envelope import LinearEnvelope, derive_envelope_recurrence, refine
from fesqueeze.expr import parse_relation
from fesqueeze.gridfn import (
    Grid,
    GridFunction,
    differential_residual,
    limit_at_zero,
    one_sided_limit,
    ratio_limit_at_zero,
    solve_fixed_point,
    sup_inf,
    sup_witness_sequence,
    tail_ratio,
)
from fesqueeze.sequences import Recurrence, classify, fixed_points, iterate, squeeze

NESTED = "f(x) + f(f(x)) = 2*x"
SHIFTED = "f(f(x) - x) = 2*x"
BOUNDING_MAP = "2 - 4/(a + 3)"


def test_01_bounding_recurrence_converges_decreasing_to_one():
    start = time.perf_counter()
    trace = iterate(Recurrence.single(BOUNDING_MAP, 2), 500)
    report = classify(trace)
    roots = fixed_points(BOUNDING_MAP, (-10.0, 10.0), root_tol=1e-9)
    elapsed = time.perf_counter() - start
    assert report.classification == "converged"
    assert report.direction == "decreasing"
    assert report.iterations <= 500
    assert report.limit == pytest.approx(1.0, abs=1e-8)
    assert sorted(roots.values) == pytest.approx([-2.0, 1.0], abs=1e-9)
    assert all(r.residual <= 1e-9 for r in roots.roots)
    assert elapsed < 0.1


def test_02_early_terms_are_exact_rationals():
    nested_trace = iterate(Recurrence.single(BOUNDING_MAP, 2), 3).values()
    assert nested_trace[0] == 2 and nested_trace[1] == Fraction(6, 5)

    lower_bounds = refine(
        derive_envelope_recurrence(parse_relation(NESTED)),
        LinearEnvelope(0, 2),
        tol=1e-8,
    ).envelopes
    assert lower_bounds[1].a == Fraction(2, 3)

    coupled = iterate(Recurrence.coupled("(b + 2)/b", "(a + 2)/a", 1, 3), 2)
    assert coupled.values("a") == [1, Fraction(5, 3)]
    assert coupled.values("b") == [3, 3]


def test_03_coupled_sequences_squeeze_to_two():
    trace = iterate(Recurrence.coupled("(b + 2)/b", "(a + 2)/a", 1, 3), 200)
    lower, upper = trace.component("a"), trace.component("b")
    for component in (lower, upper):
        report = classify(component)
        assert report.classification == "converged"
        assert report.limit == pytest.approx(2.0, abs=1e-8)
    assert squeeze(lower, upper) == pytest.approx(2.0, abs=1e-8)


def test_04_derived_envelope_maps_match_closed_forms_and_collapse():
    nested = derive_envelope_recurrence(parse_relation(NESTED))
    shifted = derive_envelope_recurrence(parse_relation(SHIFTED))
    rng = np.random.default_rng(42)
    for _ in range(20):
        a = float(rng.uniform(0.0, 3.0))
        b = float(rng.uniform(max(a, 0.1), 4.0))
        na, nb = nested.step(a, b)
        assert float(na) == pytest.approx(2.0 / (b + 1.0), rel=1e-12)
        assert float(nb) == pytest.approx(2.0 / (a + 1.0), rel=1e-12)

        a2 = float(rng.uniform(1.0, 3.0))
        b2 = float(rng.uniform(a2, 4.0))
        sa, sb = shifted.step(a2, b2)
        assert float(sa) == pytest.approx((b2 + 2.0) / b2, rel=1e-12)
        assert float(sb) == pytest.approx((a2 + 2.0) / a2, rel=1e-12)

    nested_trace = refine(nested, LinearEnvelope(0, 2), tol=1e-8)
    assert nested_trace.collapsed
    assert float(nested_trace.envelopes[-1].width) <= 1e-8
    assert nested_trace.c == pytest.approx(1.0, abs=1e-8)

    shifted_trace = refine(shifted, LinearEnvelope(1, 3), tol=1e-8)
    assert shifted_trace.collapsed
    assert float(shifted_trace.envelopes[-1].width) <= 1e-8
    assert shifted_trace.c == pytest.approx(2.0, abs=1e-8)


def test_05_every_bundled_solution_passes_sampled_residual_checks(corpus):
    start = time.perf_counter()
    report = run_all(corpus, ("verify",), seed=0, samples=1000, tol=1e-9)
    elapsed = time.perf_counter() - start
    checked = [o for o in report.outcomes if o.residual_max is not None]
    assert len(checked) == 16  # every problem that bundles a solution
    assert all(o.verified for o in checked)
    assert max(o.residual_max for o in checked) <= 1e-9
    assert all(o.residual_samples == 1000 for o in checked)
    assert elapsed < 5.0


def test_06_grid_oracle_reproduces_known_solutions(problems):
    for name in ("P2.1", "P2.2"):
        problem = problems[name]
        grid = problem_grid(problem, n=512)
        start = time.perf_counter()
        oracle, report = solve_fixed_point(
            problem.relations[0],
            grid,
            init=problem.solve_init,
            pivot=problem.pivot,
            damping=0.5,
        )
        elapsed = time.perf_counter() - start
        assert report.converged, name
        reference = GridFunction.from_candidate(grid, problem.candidates()[0])
        cut = max(1, int(0.05 * len(grid)))
        deviation = np.abs(oracle.values - reference.values) / np.abs(reference.values)
        assert float(deviation[cut : len(grid) - cut].max()) <= 1e-6, name
        assert elapsed < 5.0, name


def test_07_one_sided_limits_bracket_monotone_functions():
    rng = np.random.default_rng(2026)
    for case in range(100):
        n = int(rng.integers(32, 257))
        span = float(rng.uniform(0.5, 10.0))
        grid = Grid.linear(0.0, span, n)
        values = np.cumsum(rng.uniform(0.01, 1.0, n)) + float(rng.uniform(-5.0, 5.0))
        if case % 2:
            values = -values  # decreasing half the time
        gf = GridFunction(grid, values)
        x0 = float(rng.uniform(grid.points[3], grid.points[-4]))
        k = int(np.searchsorted(grid.points, x0))
        for side in ("left", "right"):
            est = one_sided_limit(gf, x0, side)
            assert est.monotone_consistent
            # the one-sided limit of a monotone function is the inf/sup of
            # the samples on that side, attained at the nearest of them
            if side == "right":
                samples = values[grid.points > x0]
                local_step = abs(values[min(k + 1, n - 1)] - values[k])
            else:
                samples = values[grid.points < x0]
                local_step = abs(values[k - 1] - values[max(k - 2, 0)])
            toward_inf = (est.direction == "increasing") == (side == "right")
            bound = float(samples.min() if toward_inf else samples.max())
            assert est.nearest_value == pytest.approx(bound)
            assert abs(est.value - est.nearest_value) <= local_step + 1e-12


def test_08_witness_values_climb_within_the_epsilon_schedule():
    rng = np.random.default_rng(77)
    for _ in range(100):
        n = int(rng.integers(32, 257))
        lo = 10.0 ** float(rng.uniform(-3.0, -1.0))
        hi = 10.0 ** float(rng.uniform(1.0, 3.0))
        gf = GridFunction(Grid.log(lo, hi, n), rng.uniform(0.1, 50.0, n))
        wit = sup_witness_sequence(gf, count=8)
        f_values = [fx for _, fx in wit.points]
        slack = 1e-12 * abs(wit.sup)
        assert all(b >= a - slack for a, b in zip(f_values, f_values[1:]))
        for fx, eps in zip(f_values, wit.epsilons):
            assert fx >= wit.sup - eps - slack
        assert all(fx <= wit.sup + slack for fx in f_values)


def test_09_derivative_relations_hold_for_their_closed_forms(problems):
    cubic = parse_relation("f'(x) * f(x)^3 = x^3")
    identity = GridFunction.from_callable(Grid.log(1e-3, 1e3, 512), lambda t: t)
    assert differential_residual(cubic, identity).max_residual <= 1e-6

    halving = problems["P3.5"]
    grid = problem_grid(halving)
    members = halving.candidates()
    assert [dict(p) for p in halving.solution_params] == [
        {"c": 1, "d": 0},
        {"c": 2, "d": -3},
    ]
    for member in members:
        rep = differential_residual(halving.relations[0], member, grid)
        assert rep.max_residual <= 1e-8


def test_10_ratio_sup_factorizes_exactly_only_for_constant_denominators():
    rng = np.random.default_rng(123)
    grid = Grid.log(1e-2, 1e2, 128)
    for _ in range(100):
        numerator = GridFunction(grid, rng.uniform(0.5, 20.0, 128))
        denominator = GridFunction(grid, np.full(128, float(rng.uniform(0.5, 5.0))))
        ratio = GridFunction(grid, numerator.values / denominator.values)
        assert sup_inf(ratio).S == sup_inf(numerator).S / sup_inf(denominator).I

    for _ in range(100):
        g = GridFunction(grid, rng.uniform(0.5, 10.0, 128))
        f = GridFunction(grid, g.values**2)
        m, big_m = sup_inf(g).I, sup_inf(g).S
        assert m < big_m  # non-constant draw
        assert m * big_m != sup_inf(f).S
        assert m * big_m < sup_inf(f).S


def test_11_limit_panel_recovers_the_simple_tails():
    grid = Grid.log(1e-4, 1e4, 512)
    identity = GridFunction.from_callable(grid, lambda t: t)
    shifted = GridFunction.from_callable(grid, lambda t: t + 1.0)
    panel = {
        "zero/identity": (limit_at_zero(identity), 0.0),
        "zero/shifted": (limit_at_zero(shifted), 1.0),
        "ratio-at-zero/identity": (ratio_limit_at_zero(identity), 1.0),
        "tail-ratio/identity": (tail_ratio(identity), 1.0),
    }
    for label, (estimate, target) in panel.items():
        assert not estimate.unbounded, label
        assert estimate.value == pytest.approx(target, abs=1e-3), label
        assert estimate.uncertainty <= 1e-3, label
