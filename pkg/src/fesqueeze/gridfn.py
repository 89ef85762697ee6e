"""Grid-sampled function oracles and the numeric toolbox built on them.

A GridFunction stores samples of a candidate f over a fixed grid and answers
interpolation, derivative, and inverse queries through the compiled kernels.
On log-scale grids everything happens in log-log coordinates, so power laws
interpolate exactly and endpoint extension keeps the local exponent.

The rest of the module implements the numeric instruments: a damped
fixed-point solver that isolates a designated f(x) occurrence and iterates
the resulting update, sup/inf scans with witness sequences, one-sided limit
estimation for monotone data, geometric tail extrapolation toward 0 and
infinity, and differential residual scans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._kernels import (
    MODE_LINEAR,
    MODE_LOGLOG,
    FSpec,
    candidate_fspec,
    eval_tape,
    grid_derivative,
    grid_fspec,
    grid_interp,
    grid_inverse,
)
from .errors import (
    BoundaryPointError,
    EmptyWindowError,
    EvaluationDomainError,
    NonFiniteError,
    NotMonotoneNearPointError,
    NotSolvableForPivotError,
    SolveDivergedError,
)
from .expr import (
    BinOp,
    CandidateFunction,
    Const,
    Exp,
    Expr,
    FApp,
    FInv,
    FPrime,
    FunctionalRelation,
    Ln,
    Neg,
    Pow,
    Var,
    parse_candidate_expression,
    substitute,
)
from .tape import compile_tape

DEFAULT_GRID_MIN = 1e-3
DEFAULT_GRID_MAX = 1e3
DEFAULT_GRID_POINTS = 512
MIN_GRID_POINTS = 16

DEFAULT_DAMPING = 0.5
DEFAULT_SOLVE_TOL = 1e-10
DEFAULT_SOLVE_MAX_ITER = 500
OSCILLATION_STREAK = 8
DIVERGENCE_STREAK = 50
CLAMP_FLOOR = 1e-12

TAIL_POINTS = 8
MONOTONE_WINDOW = 16
PAIR_EXTRAPOLANTS = 7
DEFAULT_WITNESS_COUNT = 12


@dataclass(frozen=True, eq=False)
class Grid:
    """Fixed sample locations, either log-spaced (positive) or linear."""

    points: np.ndarray
    kind: str  # "log" | "linear"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < MIN_GRID_POINTS:
            raise ValueError(f"grid needs at least {MIN_GRID_POINTS} points")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        if self.kind == "log" and pts[0] <= 0:
            raise ValueError("log grids need strictly positive points")
        if self.kind not in ("log", "linear"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @staticmethod
    def log(lo: float = DEFAULT_GRID_MIN, hi: float = DEFAULT_GRID_MAX, n: int = DEFAULT_GRID_POINTS) -> "Grid":
        if not (0 < lo < hi):
            raise ValueError("log grid needs 0 < lo < hi")
        return Grid(np.geomspace(lo, hi, n), "log")

    @staticmethod
    def linear(lo: float, hi: float, n: int = DEFAULT_GRID_POINTS) -> "Grid":
        if not lo < hi:
            raise ValueError("linear grid needs lo < hi")
        return Grid(np.linspace(lo, hi, n), "linear")

    @staticmethod
    def symmetric(span: float = DEFAULT_GRID_MAX, n: int = DEFAULT_GRID_POINTS) -> "Grid":
        """Linear grid on [-span, span] for relations over the whole line."""
        return Grid.linear(-span, span, n)

    @property
    def mode(self) -> int:
        return MODE_LOGLOG if self.kind == "log" else MODE_LINEAR

    def __len__(self) -> int:
        return int(self.points.size)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Immutable samples of f over a grid, with interpolation semantics."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.points.shape:
            raise ValueError("values must match the grid shape")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("grid function values must be finite")
        if self.grid.kind == "log" and not np.all(vals > 0):
            raise EvaluationDomainError("log-scale grid functions must be strictly positive")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        return cls(grid, np.asarray([float(fn(float(x))) for x in grid.points]))

    @classmethod
    def from_candidate(cls, grid: Grid, cand: CandidateFunction) -> "GridFunction":
        return cls.from_callable(grid, cand)

    @cached_property
    def _fspec(self) -> FSpec:
        return grid_fspec(self.grid.points, self.values, mode=self.grid.mode, extrapolate=True)

    @cached_property
    def _fspec_inv(self) -> FSpec:
        return grid_fspec(
            self.grid.points, self.values, mode=self.grid.mode, extrapolate=True, with_inverse=True
        )

    def fspec(self, with_inverse: bool = False) -> FSpec:
        return self._fspec_inv if with_inverse else self._fspec

    def __call__(self, q):
        scalar = np.isscalar(q)
        out, _ = grid_interp(np.atleast_1d(np.asarray(q, dtype=np.float64)), self._fspec)
        return float(out[0]) if scalar else out

    def derivative(self, q):
        scalar = np.isscalar(q)
        out = grid_derivative(np.atleast_1d(np.asarray(q, dtype=np.float64)), self._fspec)
        if scalar:
            v = float(out[0])
            if not math.isfinite(v):
                raise BoundaryPointError(f"derivative undefined at {q} (needs interior neighbours)")
            return v
        return out

    def inverse(self, q):
        """Interpolated inverse; meaningful when the samples are monotone."""
        scalar = np.isscalar(q)
        out, _ = grid_inverse(np.atleast_1d(np.asarray(q, dtype=np.float64)), self._fspec_inv)
        return float(out[0]) if scalar else out

    def ratio_values(self) -> np.ndarray:
        """f(x)/x over the grid, skipping x = 0 on linear grids."""
        xs = self.grid.points
        mask = xs != 0
        return self.values[mask] / xs[mask]

    def to_csv(self, path) -> None:
        """Write the samples as CSV with header x,f in full double precision."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("x,f\n")
            for x, y in zip(self.grid.points, self.values):
                fh.write(f"{float(x)!r},{float(y)!r}\n")

    @classmethod
    def from_csv(cls, path, kind: str = "log") -> "GridFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
        if data.shape[1] != 2:
            raise ValueError("expected two columns x,f")
        return cls(Grid(data[:, 0], kind), data[:, 1])


def _grid_for(domain: str, lo: float | None = None, hi: float | None = None, n: int | None = None) -> Grid:
    n = DEFAULT_GRID_POINTS if n is None else n
    if domain == "R":
        span = DEFAULT_GRID_MAX if hi is None else hi
        if lo is not None and hi is not None:
            return Grid.linear(lo, hi, n)
        return Grid.symmetric(span, n)
    return Grid.log(DEFAULT_GRID_MIN if lo is None else lo, DEFAULT_GRID_MAX if hi is None else hi, n)


# --- fixed-point solving ---------------------------------------------------


def _children(e: Expr):
    if isinstance(e, BinOp):
        return ((0, e.left), (1, e.right))
    if isinstance(e, Neg):
        return ((0, e.operand),)
    if isinstance(e, Pow):
        return ((0, e.base),)
    if isinstance(e, (FApp, FPrime, FInv)):
        return ((0, e.arg),)
    if isinstance(e, (Ln, Exp)):
        return ((0, e.arg),)
    return ()


def _pivot_paths(e: Expr) -> list[tuple[int, ...]]:
    """Paths (child-slot sequences) to every f-application on literally x."""
    out: list[tuple[int, ...]] = []

    def walk(node: Expr, path: tuple[int, ...]):
        if isinstance(node, FApp) and node.arg == Var("x"):
            out.append(path)
            return
        for slot, child in _children(node):
            walk(child, path + (slot,))

    walk(e, ())
    return out


def isolate_pivot(rel: FunctionalRelation, pivot: int = 0) -> Expr:
    """Rewrite the equality as f(x) = T(x, f) for the chosen f(x) occurrence.

    Occurrences are numbered left to right across lhs then rhs.  The walk
    from the root to the occurrence inverts each node: +, -, *, / move the
    sibling across, Neg flips sign, exp/ln and f/f^{-1} cancel, and integer
    powers invert along the positive branch.  A pivot under a derivative
    has no usable inverse and raises NotSolvableForPivotError.
    """
    if rel.kind != "eq":
        raise NotSolvableForPivotError("only equalities can be solved for a pivot")
    paths = [(0, p) for p in _pivot_paths(rel.lhs)] + [(1, p) for p in _pivot_paths(rel.rhs)]
    if not paths:
        raise NotSolvableForPivotError("relation has no f-application on literally x")
    if not (0 <= pivot < len(paths)):
        raise NotSolvableForPivotError(f"pivot index {pivot} out of range (found {len(paths)})")
    side, path = paths[pivot]
    node = rel.lhs if side == 0 else rel.rhs
    other = rel.rhs if side == 0 else rel.lhs
    for slot in path:
        if isinstance(node, BinOp):
            lft, rgt = node.left, node.right
            if node.op == "+":
                other = BinOp("-", other, rgt if slot == 0 else lft)
            elif node.op == "-":
                other = BinOp("+", other, rgt) if slot == 0 else BinOp("-", lft, other)
            elif node.op == "*":
                other = BinOp("/", other, rgt if slot == 0 else lft)
            else:
                other = BinOp("*", other, rgt) if slot == 0 else BinOp("/", lft, other)
            node = (lft, rgt)[slot]
        elif isinstance(node, Neg):
            other = Neg(other)
            node = node.operand
        elif isinstance(node, Pow):
            other = Exp(BinOp("/", Ln(other), Const(node.exponent)))
            node = node.base
        elif isinstance(node, Ln):
            other = Exp(other)
            node = node.arg
        elif isinstance(node, Exp):
            other = Ln(other)
            node = node.arg
        elif isinstance(node, FApp):
            other = FInv(other)
            node = node.arg
        elif isinstance(node, FPrime):
            raise NotSolvableForPivotError("pivot sits under a derivative")
        else:
            raise NotSolvableForPivotError(f"cannot invert through {type(node).__name__}")
    return other


@dataclass(frozen=True)
class SolveReport:
    converged: bool
    iterations: int
    update_norm: float
    damping: float
    clamps: int
    extrapolations: int


def _initial_values(grid: Grid, init) -> np.ndarray:
    if init is None:
        return grid.points.copy()
    if isinstance(init, GridFunction):
        return init.values.copy()
    if isinstance(init, str):
        e = parse_candidate_expression(init)
        t = compile_tape(e)
        vals, _ = eval_tape(t, grid.points)
        return np.asarray(vals, dtype=np.float64)
    return np.asarray(init, dtype=np.float64).copy()


def solve_fixed_point(
    rel: FunctionalRelation,
    grid: Grid | None = None,
    *,
    init=None,
    pivot: int = 0,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_SOLVE_TOL,
    max_iter: int = DEFAULT_SOLVE_MAX_ITER,
) -> tuple[GridFunction, SolveReport]:
    """Solve the relation on a grid by damped fixed-point iteration.

    The designated f(x) occurrence is isolated into f(x) = T(x, f); each
    sweep evaluates T over the whole grid against the current iterate and
    blends w <- (1 - damping) * w + damping * T(w).  Auxiliary variables y
    and z are specialized to x.  Updates that leave the representable range
    (non-finite, or non-positive on a log grid) are repaired to the previous
    value or clamped to a positive floor, and counted.  Eight consecutive
    sign-opposed update steps halve the damping; fifty consecutive growth
    steps raise SolveDivergedError.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    if grid is None:
        grid = _grid_for(rel.domain)
    spec_rel = rel
    if rel.variables - {"x"}:
        sub = {v: Var("x") for v in rel.variables - {"x"}}
        spec_rel = FunctionalRelation(
            substitute(rel.lhs, sub), substitute(rel.rhs, sub), rel.kind, rel.domain
        )
    t_expr = isolate_pivot(spec_rel, pivot)
    t_tape = compile_tape(t_expr)
    xs = grid.points
    w = _initial_values(grid, init)
    if w.shape != xs.shape:
        raise ValueError("initial values must match the grid shape")
    log_mode = grid.kind == "log"
    if log_mode:
        w = np.maximum(w, CLAMP_FLOOR)

    omega = float(damping)
    clamps = 0
    extrapolations = 0
    prev_delta = None
    osc_streak = 0
    growth_streak = 0
    prev_norm = math.inf
    update_norm = math.inf
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        fspec = grid_fspec(xs, w, mode=grid.mode, extrapolate=True, with_inverse=t_tape.has_finv)
        tv, n_extrap = eval_tape(t_tape, xs, fspec=fspec)
        extrapolations += int(n_extrap)
        tv = np.asarray(tv, dtype=np.float64)
        bad = ~np.isfinite(tv)
        if bad.all():
            # repairing every point would freeze the iterate and fake convergence
            raise SolveDivergedError("the update left the finite reals at every grid point")
        if bad.any():
            clamps += int(bad.sum())
            tv[bad] = w[bad]
        if log_mode:
            scale_w = float(np.max(np.abs(w)))
            floor = CLAMP_FLOOR * max(scale_w, 1e-300)
            low = tv < floor
            if low.any():
                clamps += int(low.sum())
                tv[low] = floor
        resid = tv - w
        scale = max(float(np.max(np.abs(w))), 1e-300)
        update_norm = float(np.max(np.abs(resid))) / scale
        new_w = w + omega * resid
        delta = new_w - w
        if prev_delta is not None and float(np.dot(delta, prev_delta)) < 0:
            osc_streak += 1
            if osc_streak >= OSCILLATION_STREAK:
                omega *= 0.5
                osc_streak = 0
        else:
            osc_streak = 0
        prev_delta = delta
        w = new_w
        if update_norm <= tol:
            converged = True
            break
        if update_norm > prev_norm:
            growth_streak += 1
            if growth_streak >= DIVERGENCE_STREAK:
                raise SolveDivergedError(
                    f"update norm grew for {DIVERGENCE_STREAK} consecutive sweeps "
                    f"(last {update_norm:.3e})"
                )
        else:
            growth_streak = 0
        prev_norm = update_norm

    if log_mode:
        w = np.maximum(w, CLAMP_FLOOR * max(float(np.max(np.abs(w))), 1e-300))
    gf = GridFunction(grid, w)
    return gf, SolveReport(converged, iterations, update_norm, omega, clamps, extrapolations)


# --- sup / inf and witnesses -----------------------------------------------


@dataclass(frozen=True)
class SupInfReport:
    S: float  # sup over grid points of the chosen functional
    I: float  # inf likewise
    arg_S: float
    arg_I: float
    window: tuple[float, float] | None
    count: int


def _windowed(xs: np.ndarray, ys: np.ndarray, window: tuple[float, float] | None):
    if window is None:
        return xs, ys
    lo, hi = window
    mask = (xs >= lo) & (xs <= hi)
    if not mask.any():
        raise EmptyWindowError(f"no grid points inside [{lo}, {hi}]")
    return xs[mask], ys[mask]


def sup_inf(
    gf: GridFunction,
    window: tuple[float, float] | None = None,
    of: str = "f",
) -> SupInfReport:
    """Sampled sup and inf of f (or f/x) over a window of the grid."""
    xs = gf.grid.points
    ys = gf.values
    if of in ("f/x", "f-over-x"):
        mask = xs != 0
        xs, ys = xs[mask], ys[mask] / xs[mask]
    elif of != "f":
        raise ValueError("of must be 'f' or 'f/x'")
    xs, ys = _windowed(xs, ys, window)
    i_max = int(np.argmax(ys))
    i_min = int(np.argmin(ys))
    return SupInfReport(
        float(ys[i_max]), float(ys[i_min]), float(xs[i_max]), float(xs[i_min]), window, int(xs.size)
    )


@dataclass(frozen=True)
class WitnessSequence:
    points: tuple[tuple[float, float], ...]  # (x_n, f(x_n))
    epsilons: tuple[float, ...]
    sup: float
    exhausted: bool  # grid resolution stopped the schedule before `count` terms


def sup_witness_sequence(
    gf: GridFunction,
    count: int = DEFAULT_WITNESS_COUNT,
    window: tuple[float, float] | None = None,
    factor: float = 10.0,
) -> WitnessSequence:
    """Witnesses x_n with f(x_n) >= sup - eps_n for eps_1 = scale, eps_n shrinking by factor.

    Each witness is the leftmost qualifying sample; the candidate sets are
    nested as eps shrinks, so the witness values are non-decreasing and
    approach the sampled sup.  When eps falls below the value resolution of
    the grid samples the schedule cannot tighten further and the achieved
    prefix is returned with the exhausted flag set.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    xs, ys = _windowed(gf.grid.points, gf.values, window)
    sup = float(ys.max())
    scale = max(float(np.max(np.abs(ys))), 1e-300)
    points: list[tuple[float, float]] = []
    epsilons: list[float] = []
    eps = scale
    exhausted = False
    for _ in range(count):
        threshold = sup - eps
        if threshold >= sup:  # eps fell below float resolution at this scale
            exhausted = True
            break
        idx = int(np.argmax(ys >= threshold))  # leftmost qualifying sample
        epsilons.append(eps)
        points.append((float(xs[idx]), float(ys[idx])))
        eps /= factor
    return WitnessSequence(tuple(points), tuple(epsilons), sup, exhausted)


# --- one-sided limits ------------------------------------------------------


@dataclass(frozen=True)
class LimitEstimate:
    value: float
    uncertainty: float
    nearest_value: float
    direction: str  # "increasing" | "decreasing"
    monotone_consistent: bool


def one_sided_limit(gf: GridFunction, x0: float, side: str = "right") -> LimitEstimate:
    """Estimate lim f(x) as x -> x0 from one side of monotone sample data.

    For monotone f the one-sided limit is the inf (right side, increasing)
    or sup of the nearby samples, so the estimate extends the nearest sample
    pair linearly to x0 and must land within one interpolation step of the
    nearest value; monotone_consistent records that check.
    """
    xs = gf.grid.points
    ys = gf.values
    if side == "right":
        sel = np.nonzero(xs > x0)[0]
        if sel.size < 2:
            raise BoundaryPointError(f"no samples to the right of {x0}")
        idx = sel[: MONOTONE_WINDOW]
    elif side == "left":
        sel = np.nonzero(xs < x0)[0]
        if sel.size < 2:
            raise BoundaryPointError(f"no samples to the left of {x0}")
        idx = sel[-MONOTONE_WINDOW:][::-1]  # nearest first
    else:
        raise ValueError("side must be 'left' or 'right'")
    vals = ys[idx]
    pos = xs[idx]
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    slack = 1e-12 * scale
    diffs = np.diff(vals)
    if np.all(diffs >= -slack):
        direction = "increasing" if side == "right" else "decreasing"
    elif np.all(diffs <= slack):
        direction = "decreasing" if side == "right" else "increasing"
    else:
        raise NotMonotoneNearPointError(
            f"samples near {x0} ({side} side) are not monotone; one-sided limit undefined by this method"
        )

    extrapolants = []
    n_pairs = min(PAIR_EXTRAPOLANTS, vals.size - 1)
    for i in range(n_pairs):
        x1, x2 = float(pos[i]), float(pos[i + 1])
        y1, y2 = float(vals[i]), float(vals[i + 1])
        slope = (y2 - y1) / (x2 - x1)
        extrapolants.append(y1 + slope * (x0 - x1))
    value = extrapolants[0]
    uncertainty = max(extrapolants) - min(extrapolants)
    nearest = float(vals[0])
    step = abs(float(vals[1]) - nearest)
    consistent = abs(value - nearest) <= step + 1e-9 * scale
    if direction == "increasing" and side == "right":
        consistent = consistent and value <= nearest + 1e-9 * scale
    if direction == "decreasing" and side == "right":
        consistent = consistent and value >= nearest - 1e-9 * scale
    return LimitEstimate(value, uncertainty, nearest, direction, consistent)


# --- tail extrapolation ----------------------------------------------------


@dataclass(frozen=True)
class TailEstimate:
    value: float
    uncertainty: float
    unbounded: bool
    ratio: float  # last difference ratio along the approach


def _geometric_tail(w: np.ndarray, scale: float) -> TailEstimate:
    """Extrapolate a sequence w_0..w_{k} along its geometric difference tail.

    With differences d_n = w_{n+1} - w_n decaying like d_n ~ r^n, the
    remaining mass past the last sample sums to d_last * r / (1 - r).
    On a log grid this is exact for linear-plus-constant behavior.
    """
    d = np.diff(w)
    tiny = 1e-14 * scale
    if abs(d[-1]) <= tiny and abs(d[-2]) <= tiny:
        return TailEstimate(float(w[-1]), 0.0, False, 0.0)
    if abs(d[-2]) <= tiny:
        return TailEstimate(float(w[-1]), abs(float(d[-1])), False, 0.0)
    r = float(d[-1] / d[-2])
    if r >= 1.0 - 1e-9:
        # one non-contracting step can be boundary noise; call it diverging
        # only when the previous ratio sustains the growth
        r_prev = float(d[-2] / d[-3]) if abs(float(d[-3])) > tiny else 0.0
        if r_prev >= 1.0 - 1e-9:
            value = math.inf if d[-1] > 0 else -math.inf
            return TailEstimate(value, math.inf, True, r)
        return TailEstimate(float(w[-1]), float(np.max(np.abs(d[-3:]))), False, r)
    extrapolants = []
    for k in range(len(w) - 1, max(len(w) - 4, 1), -1):
        dk = float(w[k] - w[k - 1])
        dk_prev = float(w[k - 1] - w[k - 2]) if k >= 2 else 0.0
        if abs(dk_prev) <= tiny:
            extrapolants.append(float(w[k]))
            continue
        rk = dk / dk_prev
        if abs(rk) >= 1.0 - 1e-9:
            continue
        extrapolants.append(float(w[k]) + dk * rk / (1.0 - rk))
    if not extrapolants:
        return TailEstimate(float(w[-1]), abs(float(d[-1])), False, r)
    value = extrapolants[0]
    uncertainty = max(extrapolants) - min(extrapolants)
    return TailEstimate(value, uncertainty, False, r)


def _tail_window(gf: GridFunction, values: np.ndarray, toward_zero: bool) -> tuple[np.ndarray, float]:
    n = min(TAIL_POINTS, values.size)
    if toward_zero:
        w = values[:n][::-1]  # ordered along the approach x -> 0
    else:
        w = values[-n:]
    scale = max(float(np.max(np.abs(w))), 1e-300)
    return np.asarray(w, dtype=np.float64), scale


def limit_at_zero(gf: GridFunction) -> TailEstimate:
    """Extrapolated limit of f(x) as x -> 0+ (log grids)."""
    if gf.grid.kind != "log":
        raise EvaluationDomainError("limit at zero needs a log grid approaching 0+")
    w, scale = _tail_window(gf, gf.values, toward_zero=True)
    return _geometric_tail(w, scale)


def ratio_limit_at_zero(gf: GridFunction) -> TailEstimate:
    """Extrapolated limit of f(x)/x as x -> 0+ (log grids)."""
    if gf.grid.kind != "log":
        raise EvaluationDomainError("ratio limit at zero needs a log grid approaching 0+")
    w, scale = _tail_window(gf, gf.values / gf.grid.points, toward_zero=True)
    return _geometric_tail(w, scale)


def tail_ratio(gf: GridFunction) -> TailEstimate:
    """Extrapolated limit of x/f(x) as x -> +infinity (log grids)."""
    if gf.grid.kind != "log":
        raise EvaluationDomainError("tail ratio needs a log grid approaching infinity")
    w, scale = _tail_window(gf, gf.grid.points / gf.values, toward_zero=False)
    return _geometric_tail(w, scale)


# --- differential residuals ------------------------------------------------


@dataclass(frozen=True)
class DifferentialReport:
    max_residual: float
    arg_max: float
    samples: int


def _fspec_of(fn, with_inverse: bool = False) -> FSpec:
    if isinstance(fn, GridFunction):
        return fn.fspec(with_inverse)
    if isinstance(fn, CandidateFunction):
        ctape = compile_tape(fn.bound_expr())
        dtape = compile_tape(fn.bound_derivative_expr())
        return candidate_fspec(ctape, dtape)
    raise TypeError("expected a GridFunction or CandidateFunction")


def differential_residual(
    rel: FunctionalRelation,
    fn,
    grid: Grid | None = None,
    interior: float = 0.05,
) -> DifferentialReport:
    """Max normalized residual of a relation involving f' over interior samples.

    Residuals are |lhs - rhs| / (1 + |lhs| + |rhs|); for inequalities only
    the violation max(rhs - lhs, 0) counts.  The outer interior fraction of
    samples on each end is excluded, where one-sided derivative stencils
    would degrade the estimate.
    """
    if grid is None:
        grid = fn.grid if isinstance(fn, GridFunction) else _grid_for(rel.domain)
    spec_rel = rel
    if rel.variables - {"x"}:
        sub = {v: Var("x") for v in rel.variables - {"x"}}
        spec_rel = FunctionalRelation(
            substitute(rel.lhs, sub), substitute(rel.rhs, sub), rel.kind, rel.domain
        )
    lhs_tape = compile_tape(spec_rel.lhs)
    rhs_tape = compile_tape(spec_rel.rhs)
    fspec = _fspec_of(fn, with_inverse=lhs_tape.has_finv or rhs_tape.has_finv)
    xs = grid.points
    skip = max(1, int(round(interior * xs.size)))
    xs = xs[skip:-skip]
    lv, _ = eval_tape(lhs_tape, xs, fspec=fspec)
    rv, _ = eval_tape(rhs_tape, xs, fspec=fspec)
    lv = np.asarray(lv)
    rv = np.asarray(rv)
    gap = lv - rv
    if spec_rel.kind == "ge":
        gap = np.minimum(gap, 0.0)
    resid = np.abs(gap) / (1.0 + np.abs(lv) + np.abs(rv))
    ok = np.isfinite(resid)
    if not ok.any():
        raise NonFiniteError("residual evaluation produced no finite samples")
    resid = np.where(ok, resid, -np.inf)
    i = int(np.argmax(resid))
    return DifferentialReport(float(resid[i]), float(xs[i]), int(ok.sum()))
