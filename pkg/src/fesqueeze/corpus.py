"""Bundled problem corpus and batch verification/refinement/solve/limits runs.

Problems live as .feq files in fesqueeze/corpus_data (override with the
FESQUEEZE_CORPUS environment variable).  Candidate verification samples each
relation at seeded log-uniform bindings and checks the normalized residual
|lhs - rhs| / (1 + |lhs| + |rhs|) against a tolerance; the other stages wire
the envelope refiner, the grid oracle, and the limit estimators together and
record per-problem outcomes without aborting the batch.
"""

from __future__ import annotations

import math
import os
import zlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .envelope import (
    LinearEnvelope,
    derive_envelope_recurrence,
    refine,
    user_envelope_recurrence,
)
from .errors import FesqueezeError, UnsupportedShapeError
from .expr import CandidateFunction, FunctionalRelation
from .gridfn import (
    DEFAULT_GRID_MAX,
    DEFAULT_GRID_MIN,
    DEFAULT_GRID_POINTS,
    Grid,
    GridFunction,
    limit_at_zero,
    one_sided_limit,
    ratio_limit_at_zero,
    solve_fixed_point,
    sup_inf,
    tail_ratio,
)
from .problems import ProblemSpec, parse_problem
from .tape import compile_tape
from ._kernels import candidate_fspec, eval_tape

DEFAULT_SAMPLES = 1000
DEFAULT_RESIDUAL_TOL = 1e-9
DEFAULT_REFINE_TOL = 1e-8
STAGES = ("verify", "refine", "solve", "limits")

_MAG_FLOOR = 1e-3  # magnitude floor for signed sampling on all-reals domains


def corpus_dir():
    """Bundled corpus location (a Path or importlib traversable)."""
    override = os.environ.get("FESQUEEZE_CORPUS")
    if override:
        return Path(override)
    return resources.files("fesqueeze.corpus_data")


@dataclass(frozen=True)
class CorpusLoadError:
    file: str
    message: str


@dataclass(frozen=True)
class CorpusLoad:
    problems: tuple[ProblemSpec, ...]
    errors: tuple[CorpusLoadError, ...]

    def __iter__(self):
        return iter(self.problems)

    def __len__(self) -> int:
        return len(self.problems)


def load_corpus(directory=None) -> CorpusLoad:
    """Parse every .feq file in the directory, isolating per-file failures."""
    base = Path(directory) if directory is not None else corpus_dir()
    entries = sorted(
        (e for e in base.iterdir() if e.name.endswith(".feq")), key=lambda e: e.name
    )
    problems: list[ProblemSpec] = []
    errors: list[CorpusLoadError] = []
    for entry in entries:
        try:
            problems.append(parse_problem(entry.read_text(encoding="utf-8")))
        except FesqueezeError as exc:
            errors.append(CorpusLoadError(entry.name, str(exc)))
    return CorpusLoad(tuple(problems), tuple(errors))


# --- sampling ----------------------------------------------------------------


def _rng_for(seed: int, name: str, salt: str = "") -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode()), zlib.crc32(salt.encode())])


def _magnitude_range(problem: ProblemSpec) -> tuple[float, float]:
    lo = problem.grid_min if problem.grid_min is not None else DEFAULT_GRID_MIN
    hi = problem.grid_max if problem.grid_max is not None else DEFAULT_GRID_MAX
    if problem.domain == "R":
        lo = max(abs(lo), _MAG_FLOOR) if lo and lo > 0 else _MAG_FLOOR
        hi = abs(hi)
    return float(lo), float(hi)


def sample_bindings(
    rel: FunctionalRelation,
    problem: ProblemSpec,
    n: int,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    """Seeded log-uniform bindings for the relation's variables.

    All-reals domains draw magnitudes log-uniformly and attach random signs;
    a sample_order constraint sorts the listed variables ascending per
    binding and redraws the rare rows with ties.
    """
    lo, hi = _magnitude_range(problem)
    names = sorted(rel.variables)

    def draw(k: int) -> np.ndarray:
        mags = 10.0 ** rng.uniform(math.log10(lo), math.log10(hi), k)
        if problem.domain == "R":
            return mags * (rng.integers(0, 2, k) * 2 - 1)
        return mags

    out = {v: draw(n) for v in names}
    order = [v for v in (problem.sample_order or ()) if v in rel.variables]
    if len(order) >= 2:
        cols = np.stack([out[v] for v in order], axis=1)
        cols.sort(axis=1)
        for _ in range(8):
            tied = (np.diff(cols, axis=1) == 0).any(axis=1)
            if not tied.any():
                break
            k = int(tied.sum())
            redrawn = np.stack([draw(k) for _ in order], axis=1)
            redrawn.sort(axis=1)
            cols[tied] = redrawn
        for j, v in enumerate(order):
            out[v] = cols[:, j]
    return out


def verify_candidate(
    problem: ProblemSpec,
    cand: CandidateFunction,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> tuple[float, int]:
    """Max normalized residual of the candidate over seeded samples.

    Returns (residual_max, samples); residual_max is inf when any sample
    evaluates non-finite.
    """
    ctape = compile_tape(cand.bound_expr())
    dtape = compile_tape(cand.bound_derivative_expr())
    fspec = candidate_fspec(ctape, dtape)
    worst = 0.0
    for ridx, rel in enumerate(problem.relations):
        rng = _rng_for(seed, problem.name, f"verify:{ridx}:{cand.describe()}")
        binds = sample_bindings(rel, problem, samples, rng)
        ones = np.ones(samples)
        xv = binds.get("x", ones)
        yv = binds.get("y", ones)
        zv = binds.get("z", ones)
        lv, _ = eval_tape(compile_tape(rel.lhs), xv, yv, zv, fspec=fspec)
        rv, _ = eval_tape(compile_tape(rel.rhs), xv, yv, zv, fspec=fspec)
        gap = np.asarray(lv) - np.asarray(rv)
        if rel.kind == "ge":
            gap = np.minimum(gap, 0.0)
        resid = np.abs(gap) / (1.0 + np.abs(lv) + np.abs(rv))
        if not np.isfinite(resid).all():
            return math.inf, samples
        worst = max(worst, float(resid.max()))
    return worst, samples


# --- batch runner ------------------------------------------------------------


@dataclass(frozen=True)
class ProblemOutcome:
    name: str
    verified: bool | None  # None: no bundled solution to check
    residual_max: float | None
    residual_samples: int
    envelope_status: str | None
    envelope_steps: int | None
    collapse_c: float | None
    envelope_vs_oracle: float | None
    oracle_converged: bool | None
    oracle_iterations: int | None
    oracle_update_norm: float | None
    oracle_clamps: int | None
    oracle_extrapolations: int | None
    oracle_deviation: float | None
    at_zero: float | None
    ratio_at_zero: float | None
    tail_ratio_est: float | None
    monotone_consistent: bool | None
    messages: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return self.verified is not False


@dataclass(frozen=True)
class CorpusReport:
    stages: tuple[str, ...]
    outcomes: tuple[ProblemOutcome, ...]

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.outcomes)

    def table(self) -> str:
        header = f"{'problem':<12}{'residual':>12}{'envelope':>22}{'oracle':>10}{'pass':>6}"
        lines = [header, "-" * len(header)]
        for o in self.outcomes:
            resid = f"{o.residual_max:.2e}" if o.residual_max is not None else "-"
            if o.envelope_status == "collapsed-to-point" and o.collapse_c is not None:
                env = f"c={o.collapse_c:.6g}"
            else:
                env = o.envelope_status or "-"
            orc = "-"
            if o.oracle_converged is not None:
                orc = "conv" if o.oracle_converged else "n/c"
            lines.append(f"{o.name:<12}{resid:>12}{env:>22}{orc:>10}{'ok' if o.passed else 'FAIL':>6}")
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def problem_grid(
    problem: ProblemSpec,
    *,
    lo: float | None = None,
    hi: float | None = None,
    n: int | None = None,
) -> Grid:
    """Grid matching the problem's domain; arguments override file hints."""
    pts = n if n is not None else (problem.grid_points or DEFAULT_GRID_POINTS)
    if problem.domain == "R":
        span = hi if hi is not None else (
            problem.grid_max if problem.grid_max is not None else DEFAULT_GRID_MAX
        )
        low = lo if lo is not None else (
            problem.grid_min if problem.grid_min is not None else -span
        )
        return Grid.linear(float(low), float(span), pts)
    low = lo if lo is not None else (
        problem.grid_min if problem.grid_min is not None else DEFAULT_GRID_MIN
    )
    high = hi if hi is not None else (
        problem.grid_max if problem.grid_max is not None else DEFAULT_GRID_MAX
    )
    return Grid.log(float(low), float(high), pts)


def limits_summary(gf: GridFunction) -> dict[str, float | bool | None]:
    """Limit panel for one grid function.

    Log grids get the full treatment (origin limit, ratio limit, tail ratio);
    linear grids only support a one-sided limit at zero.  The consistency flag
    comes from a one-sided limit at an interior midpoint.
    """
    panel: dict[str, float | bool | None] = {
        "at_zero": None,
        "ratio_at_zero": None,
        "tail_ratio": None,
        "monotone_consistent": None,
    }
    if gf.grid.kind == "log":
        panel["at_zero"] = limit_at_zero(gf).value
        panel["ratio_at_zero"] = ratio_limit_at_zero(gf).value
        panel["tail_ratio"] = tail_ratio(gf).value
        mid = math.sqrt(float(gf.grid.points[0]) * float(gf.grid.points[-1]))
    else:
        panel["at_zero"] = one_sided_limit(gf, 0.0, "right").value
        mid = 0.5 * float(gf.grid.points[-1])
    panel["monotone_consistent"] = one_sided_limit(gf, mid, "right").monotone_consistent
    return panel


def candidate_gridfn(problem: ProblemSpec, cand: CandidateFunction) -> GridFunction:
    grid = problem_grid(problem)
    ctape = compile_tape(cand.bound_expr())
    vals, _ = eval_tape(ctape, grid.points)
    return GridFunction(grid, np.asarray(vals))


def _run_problem(
    problem: ProblemSpec,
    stages: tuple[str, ...],
    seed: int,
    samples: int,
    tol: float,
    refine_tol: float,
) -> ProblemOutcome:
    messages: list[str] = []
    verified: bool | None = None
    residual_max: float | None = None
    cands = problem.candidates()

    if "verify" in stages:
        if cands:
            worst = 0.0
            try:
                for cand in cands:
                    r, _ = verify_candidate(problem, cand, samples, seed)
                    worst = max(worst, r)
                residual_max = worst
                verified = worst <= tol
                if not verified:
                    messages.append(f"residual {worst:.3e} exceeds {tol:.1e}")
            except FesqueezeError as exc:
                verified = False
                messages.append(f"verify failed: {exc}")
        else:
            messages.append("no bundled solution; parse-only")

    oracle: GridFunction | None = None
    oracle_report = None
    oracle_dev: float | None = None
    if "solve" in stages and problem.solve:
        try:
            grid = problem_grid(problem)
            oracle, oracle_report = solve_fixed_point(
                problem.relations[0],
                grid,
                init=problem.solve_init,
                pivot=problem.pivot,
                damping=problem.damping if problem.damping is not None else 0.5,
            )
            if cands:
                ref = candidate_gridfn(problem, cands[0])
                n = len(grid)
                cut = max(1, int(0.05 * n))
                dev = np.abs(oracle.values - ref.values) / (np.abs(ref.values) + 1e-300)
                oracle_dev = float(dev[cut : n - cut].max())
        except FesqueezeError as exc:
            messages.append(f"solve failed: {exc}")

    env_status: str | None = None
    env_steps: int | None = None
    collapse_c: float | None = None
    env_vs_oracle: float | None = None
    if "refine" in stages:
        try:
            if problem.envelope_lower_map is not None:
                rec = user_envelope_recurrence(problem.envelope_lower_map, problem.envelope_upper_map)
            else:
                rec = derive_envelope_recurrence(problem.relations[0])
            env0 = problem.envelope_init
            if env0 is None and oracle is not None:
                env0 = (0, sup_inf(oracle, of="f/x").S)
            if env0 is None:
                env_status = "skipped"
                messages.append("refine skipped: no initial envelope available")
            else:
                trace = refine(rec, LinearEnvelope(env0[0], env0[1]), tol=refine_tol)
                env_status = trace.status
                env_steps = len(trace.envelopes) - 1
                collapse_c = trace.c
                if trace.trap_violations:
                    messages.append(f"envelope left the trap at steps {trace.trap_violations[:3]}")
                if collapse_c is not None and oracle is not None:
                    env_vs_oracle = abs(collapse_c - sup_inf(oracle, of="f/x").S)
        except UnsupportedShapeError as exc:
            env_status = "unsupported"
            messages.append(f"envelope derivation unsupported: {exc}")
        except FesqueezeError as exc:
            env_status = "failed"
            messages.append(f"refine failed: {exc}")

    at_zero = ratio_zero = tail = None
    monotone_ok: bool | None = None
    if "limits" in stages:
        # the bundled closed form gives clean tails; the oracle is the fallback
        gf = None
        if cands:
            try:
                gf = candidate_gridfn(problem, cands[0])
            except FesqueezeError as exc:
                messages.append(f"limits skipped: {exc}")
        if gf is None:
            gf = oracle
        if gf is not None:
            try:
                panel = limits_summary(gf)
                at_zero = panel["at_zero"]
                ratio_zero = panel["ratio_at_zero"]
                tail = panel["tail_ratio"]
                monotone_ok = panel["monotone_consistent"]
            except FesqueezeError as exc:
                messages.append(f"limits incomplete: {exc}")

    return ProblemOutcome(
        name=problem.name,
        verified=verified,
        residual_max=residual_max,
        residual_samples=samples if residual_max is not None else 0,
        envelope_status=env_status,
        envelope_steps=env_steps,
        collapse_c=collapse_c,
        envelope_vs_oracle=env_vs_oracle,
        oracle_converged=oracle_report.converged if oracle_report else None,
        oracle_iterations=oracle_report.iterations if oracle_report else None,
        oracle_update_norm=oracle_report.update_norm if oracle_report else None,
        oracle_clamps=oracle_report.clamps if oracle_report else None,
        oracle_extrapolations=oracle_report.extrapolations if oracle_report else None,
        oracle_deviation=oracle_dev,
        at_zero=at_zero,
        ratio_at_zero=ratio_zero,
        tail_ratio_est=tail,
        monotone_consistent=monotone_ok,
        messages=tuple(messages),
    )


def run_all(
    corpus: CorpusLoad | list[ProblemSpec],
    stages: tuple[str, ...] = ("verify",),
    *,
    seed: int = 0,
    samples: int = DEFAULT_SAMPLES,
    tol: float = DEFAULT_RESIDUAL_TOL,
    refine_tol: float = DEFAULT_REFINE_TOL,
) -> CorpusReport:
    """Run the selected stages over every problem; failures never abort."""
    for s in stages:
        if s not in STAGES:
            raise ValueError(f"unknown stage {s!r} (expected subset of {STAGES})")
    problems = list(corpus)
    outcomes = [
        _run_problem(p, tuple(stages), seed, samples, tol, refine_tol) for p in problems
    ]
    return CorpusReport(tuple(stages), tuple(outcomes))
