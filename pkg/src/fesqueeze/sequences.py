"""Bounding-sequence recurrences and their limits.

Single maps a' = phi(a) and coupled-cross maps (a', b') = (phi_a(a,b),
phi_b(a,b)) are iterated in exact rational arithmetic until the numerators
or denominators outgrow 512 bits, then demoted to float.  Limits are
cross-checked against the fixed points of the map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from . import _kernels
from .errors import (
    AmbiguousFixedPointError,
    LimitsDisagreeError,
    NoSatisfyingFixedPointError,
    NonFiniteError,
    NotBracketingError,
    TraceNotConvergedError,
)
from .expr import (
    BinOp,
    Const,
    Exp,
    Expr,
    FApp,
    FInv,
    FPrime,
    Ln,
    Neg,
    Number,
    Pow,
    Var,
    evaluate,
    free_variables,
    iter_nodes,
    parse_map_expression,
)
from .tape import compile_tape

_NODE_TYPES = (Const, Var, BinOp, Neg, Pow, FApp, FPrime, FInv, Ln, Exp)

BIT_LIMIT = 512
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10000
SCAN_CELLS = 4096
GAP_WINDOW = 5

MapLike = Union[Expr, str, Callable[..., Number]]


def _as_map_expr(m: MapLike, variables: tuple[str, ...]) -> Expr:
    if isinstance(m, str):
        m = parse_map_expression(m, variables)
    if not isinstance(m, _NODE_TYPES):
        raise TypeError("recurrence maps must be expressions or expression text")
    if any(isinstance(n, (FApp, FPrime, FInv)) for n in iter_nodes(m)):
        raise ValueError("recurrence maps must not contain f")
    extra = free_variables(m) - set(variables)
    if extra:
        raise ValueError(f"map uses variables outside {variables}: {sorted(extra)}")
    return m


def _exactify(v: Number) -> Number:
    if isinstance(v, int):
        return Fraction(v)
    return v


def _demote(v: Number) -> Number:
    """Drop to float once exact state grows beyond the bit budget."""
    if isinstance(v, Fraction) and (
        v.numerator.bit_length() > BIT_LIMIT or v.denominator.bit_length() > BIT_LIMIT
    ):
        return float(v)
    return v


@dataclass(frozen=True)
class Recurrence:
    """One or two update maps over the state variables a (and b)."""

    maps: tuple[Expr, ...]
    initial: tuple[Number, ...]

    def __post_init__(self):
        if len(self.maps) not in (1, 2) or len(self.maps) != len(self.initial):
            raise ValueError("recurrence needs 1 or 2 maps with matching initial state")

    @classmethod
    def single(cls, map_: MapLike, initial: Number) -> Recurrence:
        return cls((_as_map_expr(map_, ("a",)),), (_exactify(initial),))

    @classmethod
    def coupled(cls, map_a: MapLike, map_b: MapLike, a1: Number, b1: Number) -> Recurrence:
        return cls(
            (_as_map_expr(map_a, ("a", "b")), _as_map_expr(map_b, ("a", "b"))),
            (_exactify(a1), _exactify(b1)),
        )

    @property
    def columns(self) -> tuple[str, ...]:
        return ("a",) if len(self.maps) == 1 else ("a", "b")


@dataclass(frozen=True)
class SequenceTrace:
    """Ordered state values; exact rationals where the arithmetic allowed it."""

    columns: tuple[str, ...]
    rows: tuple[tuple[Number, ...], ...]

    def __len__(self) -> int:
        return len(self.rows)

    def values(self, column: str = "a") -> list[Number]:
        j = self.columns.index(column)
        return [row[j] for row in self.rows]

    def component(self, column: str) -> SequenceTrace:
        j = self.columns.index(column)
        return SequenceTrace((column,), tuple((row[j],) for row in self.rows))


def iterate(rec: Recurrence, n: int) -> SequenceTrace:
    """Run the recurrence to a total trace length of n (initial state included)."""
    if n < 1:
        raise ValueError("trace length must be at least 1")
    state = tuple(_exactify(v) for v in rec.initial)
    rows = [state]
    cols = rec.columns
    for step in range(1, n):
        env = dict(zip(cols, state))
        try:
            state = tuple(evaluate(m, env) for m in rec.maps)
        except NonFiniteError as exc:
            raise NonFiniteError(f"recurrence left the finite reals at step {step}: {exc}") from exc
        if any(isinstance(v, float) and not math.isfinite(v) for v in state):
            raise NonFiniteError(f"recurrence left the finite reals at step {step}")
        state = tuple(_demote(v) for v in state)
        rows.append(state)
    return SequenceTrace(cols, tuple(rows))


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ConvergenceReport:
    classification: str  # converged | monotone-unbounded | oscillating | undetermined
    direction: str  # increasing | decreasing | none
    bounded: bool | None
    limit: float | None
    iterations: int
    final_gap: float


def _nonincreasing(gaps: Sequence[float]) -> bool:
    return all(
        float(gaps[i + 1]) <= float(gaps[i]) * (1.0 + 1e-12) for i in range(len(gaps) - 1)
    )


def _nondecreasing(gaps: Sequence[float]) -> bool:
    return all(
        float(gaps[i + 1]) >= float(gaps[i]) * (1.0 - 1e-12) for i in range(len(gaps) - 1)
    )


def classify(trace: SequenceTrace, tol: float = DEFAULT_TOL) -> ConvergenceReport:
    """Decide convergence from a finite trace; honest 'undetermined' when unclear.

    Converged requires the final gap at or below tol with the last few gaps
    non-increasing; a monotone trace with non-decreasing gaps is reported
    monotone-unbounded.
    """
    if len(trace.columns) != 1:
        raise ValueError("classify a single component; use trace.component(...)")
    values = trace.values(trace.columns[0])
    if len(values) < 3:
        raise ValueError("classification needs a trace of length >= 3")
    diffs = [values[i + 1] - values[i] for i in range(len(values) - 1)]
    inc = all(d >= 0 for d in diffs)
    dec = all(d <= 0 for d in diffs)
    if inc and any(d > 0 for d in diffs):
        direction = "increasing"
    elif dec and any(d < 0 for d in diffs):
        direction = "decreasing"
    else:
        direction = "none"
    gaps = [abs(d) for d in diffs]
    tail = gaps[-GAP_WINDOW:]
    # cross-coupled maps stall every other step; gap decay is judged on the
    # moves that actually happened
    moving = [g for g in gaps if g > 0][-GAP_WINDOW:]
    final_gap = float(gaps[-1])
    iterations = len(values)

    if final_gap <= tol and _nonincreasing(moving):
        return ConvergenceReport(
            "converged", direction, True, float(values[-1]), iterations, final_gap
        )
    monotone = direction in ("increasing", "decreasing")
    if monotone:
        if _nondecreasing(tail) and final_gap > tol:
            return ConvergenceReport(
                "monotone-unbounded", direction, False, None, iterations, final_gap
            )
        return ConvergenceReport("undetermined", direction, None, None, iterations, final_gap)
    signs = [1 if d > 0 else (-1 if d < 0 else 0) for d in diffs[-(GAP_WINDOW + 1):]]
    flips = sum(
        1
        for i in range(len(signs) - 1)
        if signs[i] != 0 and signs[i + 1] != 0 and signs[i] != signs[i + 1]
    )
    if flips >= 2:
        bounded: bool | None = True if _nonincreasing(tail) else (
            False if _nondecreasing(tail) else None
        )
        return ConvergenceReport("oscillating", "none", bounded, None, iterations, final_gap)
    return ConvergenceReport("undetermined", "none", None, None, iterations, final_gap)


# ---------------------------------------------------------------------------
# fixed points


@dataclass(frozen=True)
class FixedPointRoot:
    value: float
    residual: float


@dataclass(frozen=True)
class FixedPointSet:
    roots: tuple[FixedPointRoot, ...]
    interval: tuple[float, float]
    degenerate: bool = False

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.roots]


def _map_callable(map_: MapLike) -> tuple[Callable[[float], float], Callable[[np.ndarray], np.ndarray]]:
    """Scalar and batch evaluators for a map given as Expr, text, or callable."""
    if isinstance(map_, str):
        map_ = parse_map_expression(map_, ("a", "b", "x", "y", "z"))
    if not isinstance(map_, _NODE_TYPES) and callable(map_):
        fn = map_

        def batch(arr: np.ndarray) -> np.ndarray:
            out = np.empty_like(arr)
            for i, v in enumerate(arr):
                try:
                    out[i] = fn(float(v))
                except (ArithmeticError, NonFiniteError):
                    out[i] = np.nan
            return out

        def scalar(v: float) -> float:
            return float(fn(v))

        return scalar, batch
    names = sorted(free_variables(map_))
    if len(names) > 1:
        raise ValueError("fixed-point maps must have a single free variable")
    name = names[0] if names else "a"
    tape = compile_tape(map_, {name: 0})
    expr = map_

    def scalar(v: float) -> float:
        return float(evaluate(expr, {name: v}))

    def batch(arr: np.ndarray) -> np.ndarray:
        vals, _ = _kernels.eval_tape(tape, arr)
        return vals

    return scalar, batch


def fixed_points(
    map_: MapLike,
    interval: tuple[float, float],
    root_tol: float = 1e-9,
    cells: int = SCAN_CELLS,
) -> FixedPointSet:
    """Scan for solutions of l = phi(l) by sign change plus bisection.

    Poles are excluded automatically: a sign change whose bisected midpoint
    never drives |l - phi(l)| under root_tol is rejected.  The identity map
    is flagged degenerate rather than reported as a root list.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError("interval must satisfy lo < hi")
    scalar, batch = _map_callable(map_)
    grid = np.linspace(lo, hi, cells + 1)
    with np.errstate(all="ignore"):
        g = grid - batch(grid)
    finite = np.isfinite(g)
    n_finite = int(np.count_nonzero(finite))
    if n_finite and int(np.count_nonzero(finite & (np.abs(g) <= root_tol))) >= 0.99 * n_finite:
        return FixedPointSet((), (lo, hi), degenerate=True)

    def gfun(v: float) -> float:
        try:
            return v - scalar(v)
        except (ArithmeticError, NonFiniteError):
            return math.nan

    roots: list[FixedPointRoot] = []
    for i in range(cells):
        ga, gb = g[i], g[i + 1]
        if not (math.isfinite(ga) and math.isfinite(gb)):
            continue
        if ga == 0.0:
            roots.append(FixedPointRoot(float(grid[i]), 0.0))
            continue
        if ga * gb >= 0.0:
            continue
        a, b, fa = float(grid[i]), float(grid[i + 1]), float(ga)
        found = None
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = gfun(m)
            if not math.isfinite(fm):
                break
            if abs(fm) <= root_tol:
                found = FixedPointRoot(m, abs(fm))
                break
            if (fm > 0) == (fa > 0):
                a, fa = m, fm
            else:
                b = m
        if found is not None:
            roots.append(found)
    gb_last = g[cells]
    if math.isfinite(gb_last) and gb_last == 0.0:
        roots.append(FixedPointRoot(float(grid[cells]), 0.0))

    roots.sort(key=lambda r: r.value)
    merged: list[FixedPointRoot] = []
    merge_tol = max(10 * root_tol, (hi - lo) * 1e-13)
    for r in roots:
        if merged and abs(r.value - merged[-1].value) <= merge_tol:
            if r.residual < merged[-1].residual:
                merged[-1] = r
            continue
        merged.append(r)
    return FixedPointSet(tuple(merged), (lo, hi))


def select_fixed_point(fps: FixedPointSet, constraint: Callable[[float], bool]) -> float:
    """The unique root satisfying the constraint; errors on zero or many."""
    matches = [r.value for r in fps.roots if constraint(r.value)]
    if not matches:
        raise NoSatisfyingFixedPointError("no fixed point satisfies the constraint")
    if len(matches) > 1:
        raise AmbiguousFixedPointError(f"{len(matches)} fixed points satisfy the constraint")
    return matches[0]


# ---------------------------------------------------------------------------
# squeeze


def squeeze(lower: SequenceTrace, upper: SequenceTrace, tol: float = DEFAULT_TOL) -> float:
    """Common limit of a bracketing pair of traces.

    Checks lower[i] <= upper[i] pointwise, classifies both components, and
    returns the midpoint of the two limits when they agree within tol.
    """
    if len(lower.columns) != 1 or len(upper.columns) != 1:
        raise ValueError("squeeze takes single-component traces")
    lv = lower.values(lower.columns[0])
    uv = upper.values(upper.columns[0])
    if len(lv) != len(uv):
        raise ValueError("traces must have equal length")
    if len(lv) < 3:
        raise ValueError("squeeze needs traces of length >= 3")
    for i, (l, u) in enumerate(zip(lv, uv)):
        if l > u:
            raise NotBracketingError(i)
    rl = classify(lower, tol)
    ru = classify(upper, tol)
    if rl.classification != "converged" or ru.classification != "converged":
        raise TraceNotConvergedError(
            f"lower is {rl.classification}, upper is {ru.classification}"
        )
    if abs(rl.limit - ru.limit) > tol:
        raise LimitsDisagreeError(
            f"lower limit {rl.limit!r} and upper limit {ru.limit!r} differ by more than {tol!r}"
        )
    return 0.5 * (rl.limit + ru.limit)
