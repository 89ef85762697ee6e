"""Linear envelopes a*x <= f(x) <= b*x and their refinement maps.

For single-variable equalities the update maps are derived automatically:
every f-application whose argument is literally x denotes the same unknown
u = f(x); every other f-application f(t) is replaced by the interval
[a*t, b*t] (t itself evaluated as an interval, which may contain u), and
the resulting two-sided constraint is solved for u.  Both endpoints stay
linear in (u, x) throughout, which is exactly the restricted shape the
derivation supports; anything else raises UnsupportedShapeError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .errors import OrderViolationError, UnsupportedShapeError
from .expr import (
    BinOp,
    Const,
    Expr,
    FApp,
    FunctionalRelation,
    Neg,
    Number,
    Pow,
    Var,
    evaluate,
    iter_nodes,
    parse_map_expression,
)
from .sequences import _demote

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10000
STALL_WINDOW = 10


@dataclass(frozen=True)
class LinearEnvelope:
    """Coefficient pair with 0 <= a <= b, b > 0.

    Strictness flags record whether the source bounds were strict; they are
    carried along but never enter the arithmetic, which is tolerance-based.
    """

    a: Number
    b: Number
    lower_strict: bool = False
    upper_strict: bool = False

    def __post_init__(self):
        if not (math.isfinite(float(self.a)) and math.isfinite(float(self.b))):
            raise OrderViolationError(f"envelope coefficients must be finite, got ({self.a}, {self.b})")
        if not (0 <= self.a <= self.b) or self.b <= 0:
            raise OrderViolationError(f"envelope needs 0 <= a <= b with b > 0, got ({self.a}, {self.b})")

    @property
    def width(self) -> Number:
        return self.b - self.a

    @property
    def midpoint(self) -> float:
        return float(self.a + self.b) / 2.0


class _Structural(UnsupportedShapeError):
    """Shape failures independent of the envelope values."""


class _SignIndeterminate(UnsupportedShapeError):
    """An interval sign could not be fixed at the current (a, b)."""


@dataclass(frozen=True)
class _LinForm:
    """const + x_coef * x + u_coef * u, with u the pivot value f(x)."""

    u: Number
    x: Number
    const: Number

    def __add__(self, other: _LinForm) -> _LinForm:
        return _LinForm(self.u + other.u, self.x + other.x, self.const + other.const)

    def __sub__(self, other: _LinForm) -> _LinForm:
        return _LinForm(self.u - other.u, self.x - other.x, self.const - other.const)

    def __neg__(self) -> _LinForm:
        return _LinForm(-self.u, -self.x, -self.const)

    def scale(self, c: Number) -> _LinForm:
        return _LinForm(c * self.u, c * self.x, c * self.const)


_ZERO = Fraction(0)


def _constant_of(iv: tuple[_LinForm, _LinForm]) -> Number | None:
    lo, hi = iv
    if lo == hi and lo.u == 0 and lo.x == 0:
        return lo.const
    return None


def _coef_range(form: _LinForm, a: Number, b: Number) -> tuple[Number, Number]:
    """Range of the x-proportional coefficient once u is enveloped in [a*x, b*x]."""
    if form.u >= 0:
        return form.x + form.u * a, form.x + form.u * b
    return form.x + form.u * b, form.x + form.u * a

def _is_nonneg(form: _LinForm, a: Number, b: Number) -> bool:
    cmin, _ = _coef_range(form, a, b)
    return form.const >= 0 and cmin >= 0


def _is_nonpos(form: _LinForm, a: Number, b: Number) -> bool:
    _, cmax = _coef_range(form, a, b)
    return form.const <= 0 and cmax <= 0


def _interval(e: Expr, a: Number, b: Number) -> tuple[_LinForm, _LinForm]:
    if isinstance(e, Const):
        v = e.value if isinstance(e.value, Fraction) else Fraction(e.value) if isinstance(e.value, int) else e.value
        form = _LinForm(_ZERO, _ZERO, v)
        return form, form
    if isinstance(e, Var):
        if e.name != "x":
            raise _Structural("only the variable x is supported by the derivation")
        form = _LinForm(_ZERO, Fraction(1), _ZERO)
        return form, form
    if isinstance(e, Neg):
        lo, hi = _interval(e.operand, a, b)
        return -hi, -lo
    if isinstance(e, BinOp):
        llo, lhi = _interval(e.left, a, b)
        rlo, rhi = _interval(e.right, a, b)
        if e.op == "+":
            return llo + rlo, lhi + rhi
        if e.op == "-":
            return llo - rhi, lhi - rlo
        if e.op == "*":
            c = _constant_of((llo, lhi))
            other = (rlo, rhi)
            if c is None:
                c = _constant_of((rlo, rhi))
                other = (llo, lhi)
            if c is None:
                raise _Structural("products of two non-constant parts are outside the scheme")
            lo, hi = other
            return (lo.scale(c), hi.scale(c)) if c >= 0 else (hi.scale(c), lo.scale(c))
        c = _constant_of((rlo, rhi))
        if c is None:
            raise _Structural("division by a non-constant part is outside the scheme")
        if c == 0:
            raise _Structural("division by zero in the derivation")
        inv = 1 / Fraction(c) if not isinstance(c, float) else 1.0 / c
        return (llo.scale(inv), lhi.scale(inv)) if inv >= 0 else (lhi.scale(inv), llo.scale(inv))
    if isinstance(e, Pow):
        c = _constant_of(_interval(e.base, a, b))
        if c is not None:
            v = Fraction(c) ** e.exponent if not isinstance(c, float) else c**e.exponent
            form = _LinForm(_ZERO, _ZERO, v)
            return form, form
        if e.exponent == 1:
            return _interval(e.base, a, b)
        raise _Structural("powers of non-constant parts are outside the scheme")
    if isinstance(e, FApp):
        if e.arg == Var("x"):
            form = _LinForm(Fraction(1), _ZERO, _ZERO)
            return form, form
        lo, hi = _interval(e.arg, a, b)
        if not _is_nonneg(lo, a, b):
            if _is_nonpos(hi, a, b):
                raise _SignIndeterminate("f applied to a non-positive argument")
            raise _SignIndeterminate("argument sign indeterminate at the current envelope")
        return lo.scale(a), hi.scale(b)
    raise _Structural(f"{type(e).__name__} nodes are outside the restricted scheme")


def _solve_step(rel: FunctionalRelation, a: Number, b: Number) -> tuple[Number, Number]:
    """One interval-substitution pass: new (a', b') implied by the equation."""
    llo, lhi = _interval(rel.lhs, a, b)
    rlo, rhi = _interval(rel.rhs, a, b)
    lowers: list[Number] = []
    uppers: list[Number] = []
    # the equation's common value forces lhs_lo <= rhs_hi and rhs_lo <= lhs_hi
    for diff in (llo - rhi, rlo - lhi):
        if diff.const != 0:
            raise _Structural("bounds are not proportional to x (constant offset present)")
        if diff.u > 0:
            uppers.append(-diff.x / diff.u)
        elif diff.u < 0:
            lowers.append(-diff.x / diff.u)
        elif diff.x > 0:
            raise _SignIndeterminate("equation infeasible under the current envelope")
    new_a = max(lowers) if lowers else a
    new_b = min(uppers) if uppers else b
    return new_a, new_b


@dataclass(frozen=True)
class EnvelopeRecurrence:
    """Update maps (a', b') = step(a, b); auto-derived or user-supplied."""

    step: Callable[[Number, Number], tuple[Number, Number]]
    origin: str  # "auto-derived" | "user-supplied"
    lower_expr: Expr | None = None
    upper_expr: Expr | None = None

    def lower_map(self, a: Number, b: Number) -> Number:
        return self.step(a, b)[0]

    def upper_map(self, a: Number, b: Number) -> Number:
        return self.step(a, b)[1]


def derive_envelope_recurrence(rel: FunctionalRelation) -> EnvelopeRecurrence:
    """Auto-derive the refinement maps for a single-variable equality.

    Raises UnsupportedShapeError when the relation falls outside the
    restricted scheme (multiple variables, no f(x) occurrence to pivot on,
    or nonlinear structure the interval pass cannot bound).
    """
    if rel.kind != "eq":
        raise UnsupportedShapeError("envelope derivation needs an equality")
    extra = rel.variables - {"x"}
    if extra:
        raise UnsupportedShapeError(
            f"variables {sorted(extra)} present: no isolatable pivot under the restricted scheme"
        )
    pivot_found = any(
        isinstance(n, FApp) and n.arg == Var("x")
        for side in (rel.lhs, rel.rhs)
        for n in iter_nodes(side)
    )
    if not pivot_found:
        raise UnsupportedShapeError("no f-occurrence with argument literally x")

    def step(a: Number, b: Number) -> tuple[Number, Number]:
        return _solve_step(rel, a, b)

    # catch structural problems eagerly; sign checks depend on (a, b) and stay lazy
    try:
        step(Fraction(1, 3), Fraction(1, 2))
    except _SignIndeterminate:
        pass
    except _Structural:
        raise
    return EnvelopeRecurrence(step, "auto-derived")


def user_envelope_recurrence(lower: Expr | str, upper: Expr | str) -> EnvelopeRecurrence:
    """Wrap user-supplied update expressions in the state variables (a, b)."""
    lower_expr = parse_map_expression(lower) if isinstance(lower, str) else lower
    upper_expr = parse_map_expression(upper) if isinstance(upper, str) else upper

    def step(a: Number, b: Number) -> tuple[Number, Number]:
        env = {"a": a, "b": b}
        return evaluate(lower_expr, env), evaluate(upper_expr, env)

    return EnvelopeRecurrence(step, "user-supplied", lower_expr, upper_expr)


@dataclass(frozen=True)
class RefinementTrace:
    envelopes: tuple[LinearEnvelope, ...]
    status: str  # collapsed-to-point | stalled | max-iterations
    c: float | None
    trap_violations: tuple[int, ...]

    @property
    def collapsed(self) -> bool:
        return self.status == "collapsed-to-point"

    def widths(self) -> list[float]:
        return [float(env.width) for env in self.envelopes]


def refine(
    rec: EnvelopeRecurrence,
    env0: LinearEnvelope | tuple[Number, Number],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> RefinementTrace:
    """Iterate the envelope maps until the width collapses, stalls, or times out.

    Arithmetic stays exact while the rationals are small enough; a refined
    lower bound exceeding the refined upper bound raises OrderViolationError,
    while steps that leave [a, b] (monotone-trapping violations) are recorded
    and reported rather than rejected.
    """
    if not isinstance(env0, LinearEnvelope):
        env0 = LinearEnvelope(
            Fraction(env0[0]) if isinstance(env0[0], int) else env0[0],
            Fraction(env0[1]) if isinstance(env0[1], int) else env0[1],
        )
    envelopes = [env0]
    violations: list[int] = []
    status = "max-iterations"
    a, b = env0.a, env0.b
    for k in range(1, max_iter + 1):
        new_a, new_b = rec.step(a, b)
        if new_a > new_b:
            raise OrderViolationError(
                f"refined lower bound {new_a} exceeds upper bound {new_b} at step {k}"
            )
        if new_a < a or new_b > b:
            violations.append(k)
        new_a, new_b = _demote(new_a), _demote(new_b)
        envelopes.append(LinearEnvelope(new_a, new_b))
        a, b = new_a, new_b
        if b - a <= tol:
            status = "collapsed-to-point"
            break
        if len(envelopes) > STALL_WINDOW:
            before = envelopes[-1 - STALL_WINDOW].width
            if float(before) - float(b - a) <= tol / 10:
                status = "stalled"
                break
    env_final = envelopes[-1]
    c = env_final.midpoint if status == "collapsed-to-point" else None
    return RefinementTrace(tuple(envelopes), status, c, tuple(violations))


@dataclass(frozen=True)
class EnvelopeValidation:
    valid: bool
    min_lower_slack: float
    min_upper_slack: float
    scale: float


def validate_envelope(env: LinearEnvelope, gf, rel_tol: float = 1e-9) -> EnvelopeValidation:
    """Check a*x <= f^(x) <= b*x against a grid oracle, up to rel_tol slack."""
    xs = gf.grid.points
    ys = gf.values
    a, b = float(env.a), float(env.b)
    lower_slack = float((ys - a * xs).min())
    upper_slack = float((b * xs - ys).min())
    scale = float(abs(ys).max())
    valid = lower_slack >= -rel_tol * scale and upper_slack >= -rel_tol * scale
    return EnvelopeValidation(valid, lower_slack, upper_slack, scale)
