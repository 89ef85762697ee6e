"""Command-line frontend: parse, verify, refine, solve, limits, corpus.

Each subcommand prints a short human-readable summary to stdout and can also
write a JSON report (--json), a CSV table (--csv), and a static SVG plot
(--svg).  Reports carry no timestamps, so the same argv and seed produce
byte-identical JSON.

Exit codes: 0 on success, 1 on verification failure, 2 on usage/parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .corpus import (
    DEFAULT_REFINE_TOL,
    DEFAULT_RESIDUAL_TOL,
    STAGES,
    corpus_dir,
    limits_summary,
    load_corpus,
    problem_grid,
    run_all,
    verify_candidate,
)
from .envelope import (
    DEFAULT_MAX_ITER,
    LinearEnvelope,
    RefinementTrace,
    derive_envelope_recurrence,
    refine,
    user_envelope_recurrence,
)
from .errors import FesqueezeError
from .expr import CandidateFunction, parse_candidate
from .gridfn import (
    DEFAULT_DAMPING,
    DEFAULT_SOLVE_TOL,
    GridFunction,
    solve_fixed_point,
    sup_inf,
)
from .problems import ProblemSpec, parse_problem
from .svg import envelope_convergence_svg, gridfn_svg

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class _UsageError(Exception):
    """Bad arguments or unparseable input files; exits with status 2."""


# ---------------------------------------------------------------------------
# argument plumbing


def _add_shared(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--problem", metavar="PATH", help="problem file (.feq)")
    sp.add_argument("--candidate", metavar="EXPR", help="candidate expression in x")
    sp.add_argument("--grid-min", type=float, dest="grid_min", metavar="F")
    sp.add_argument("--grid-max", type=float, dest="grid_max", metavar="F")
    sp.add_argument("--points", type=int, metavar="N", help="grid size (>= 16)")
    sp.add_argument("--tol", type=float, metavar="F", help="stage tolerance")
    sp.add_argument("--damping", type=float, metavar="F", help="solver damping in (0, 1]")
    sp.add_argument("--samples", type=int, default=1000, metavar="N")
    sp.add_argument("--seed", type=int, default=0, metavar="N")
    sp.add_argument("--json", dest="json_path", metavar="PATH", help="write a JSON report")
    sp.add_argument("--csv", dest="csv_path", metavar="PATH", help="write a CSV table")
    sp.add_argument("--svg", dest="svg_path", metavar="PATH", help="write an SVG plot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fesqueeze",
        description="Numerical squeeze toolkit for functional equations.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    specs = [
        ("parse", "check a problem file or candidate expression"),
        ("verify", "sample residuals of a candidate against a problem"),
        ("refine", "run the linear envelope refinement"),
        ("solve", "solve for a grid oracle by damped fixed-point iteration"),
        ("limits", "estimate limits at zero and in the tail"),
        ("corpus", "run stages across the bundled problem corpus"),
    ]
    for name, help_text in specs:
        sp = sub.add_parser(name, help=help_text)
        _add_shared(sp)
        if name == "corpus":
            sp.add_argument(
                "--stages",
                default="verify",
                metavar="LIST",
                help="comma-separated subset of verify,refine,solve,limits",
            )
    return parser


def _require_problem(args) -> ProblemSpec:
    if not args.problem:
        raise _UsageError("--problem PATH is required for this subcommand")
    path = Path(args.problem)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    else:
        # bare names fall back to the bundled corpus (or FESQUEEZE_CORPUS)
        try:
            text = (corpus_dir() / path.name).read_text(encoding="utf-8")
        except (FileNotFoundError, OSError):
            raise _UsageError(f"problem file not found: {args.problem}") from None
    try:
        return parse_problem(text)
    except FesqueezeError as exc:
        raise _UsageError(f"cannot parse {args.problem}: {exc}") from None


def _candidate_of(args) -> CandidateFunction | None:
    if not args.candidate:
        return None
    try:
        return parse_candidate(args.candidate)
    except (FesqueezeError, ValueError) as exc:
        raise _UsageError(f"cannot parse candidate: {exc}") from None


def _grid_of(problem: ProblemSpec, args):
    try:
        return problem_grid(problem, lo=args.grid_min, hi=args.grid_max, n=args.points)
    except (FesqueezeError, ValueError) as exc:
        raise _UsageError(f"bad grid parameters: {exc}") from None


# ---------------------------------------------------------------------------
# report output


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float):
        if math.isfinite(value):
            return value
        return repr(value)
    return value


def _emit(args, report: dict, lines: list[str], svg_text: str | None = None) -> None:
    for line in lines:
        print(line)
    if args.json_path:
        text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
        Path(args.json_path).write_text(text, encoding="utf-8")
    if args.svg_path and svg_text is not None:
        Path(args.svg_path).write_text(svg_text, encoding="utf-8")


def _trace_csv(trace: RefinementTrace) -> str:
    rows = ["n,a_n,b_n,width"]
    for n, env in enumerate(trace.envelopes):
        rows.append(f"{n},{float(env.a)!r},{float(env.b)!r},{float(env.width)!r}")
    return "\n".join(rows) + "\n"


def _write_csv(args, text: str | None) -> None:
    if args.csv_path and text is not None:
        Path(args.csv_path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_parse(args) -> int:
    problem = _require_problem(args) if args.problem else None
    cand = _candidate_of(args)
    if problem is None and cand is None:
        raise _UsageError("parse needs --problem and/or --candidate")
    lines: list[str] = []
    if problem is not None:
        lines.append(f"problem: {problem.name} (domain {problem.domain})")
        for rel in problem.relations:
            lines.append(f"  relation: {rel.unparse()}")
        for member in problem.candidates():
            lines.append(f"  known solution: {member.describe()}")
    if cand is not None:
        lines.append(f"candidate: {cand.describe()}")
    report = {"stage": "parse", "problem": problem.name if problem else None}
    _emit(args, report, lines)
    return EXIT_OK


def _cmd_verify(args) -> int:
    problem = _require_problem(args)
    tol = args.tol if args.tol is not None else DEFAULT_RESIDUAL_TOL
    cand = _candidate_of(args)
    family = (cand,) if cand is not None else problem.candidates()
    if not family:
        raise _UsageError(f"{problem.name} has no bundled solution; pass --candidate EXPR")
    worst = 0.0
    total = 0
    for member in family:
        value, count = verify_candidate(problem, member, samples=args.samples, seed=args.seed)
        worst = max(worst, value)
        total += count
    ok = worst <= tol
    report = {
        "stage": "verify",
        "problem": problem.name,
        "residual_max": worst,
        "residual_samples": total,
    }
    lines = [
        f"problem: {problem.name}",
        "candidates: " + ", ".join(m.describe() for m in family),
        f"residual_max = {worst:.6g} over {total} samples (tol {tol:g})",
        "PASS" if ok else "FAIL",
    ]
    gf = GridFunction.from_candidate(_grid_of(problem, args), family[0])
    _emit(args, report, lines, svg_text=_maybe_svg(args, gf, f"{problem.name} candidate"))
    if args.csv_path:
        gf.to_csv(args.csv_path)
    return EXIT_OK if ok else EXIT_FAIL


def _maybe_svg(args, gf: GridFunction, title: str, envelope=None) -> str | None:
    if not args.svg_path:
        return None
    return gridfn_svg(gf, envelope=envelope, title=title)


def _solve_oracle(problem: ProblemSpec, args, tol: float | None = None):
    damping = args.damping
    if damping is None:
        damping = problem.damping if problem.damping is not None else DEFAULT_DAMPING
    return solve_fixed_point(
        problem.relations[0],
        _grid_of(problem, args),
        init=problem.solve_init,
        pivot=problem.pivot,
        damping=damping,
        tol=tol if tol is not None else DEFAULT_SOLVE_TOL,
    )


def _cmd_refine(args) -> int:
    problem = _require_problem(args)
    tol = args.tol if args.tol is not None else DEFAULT_REFINE_TOL
    if problem.envelope_lower_map is not None:
        rec = user_envelope_recurrence(problem.envelope_lower_map, problem.envelope_upper_map)
    else:
        rec = derive_envelope_recurrence(problem.relations[0])
    init = problem.envelope_init
    if init is not None:
        env0 = LinearEnvelope(init[0], init[1])
    else:
        # no bounds in the file: seed the upper slope from the grid oracle
        oracle, _ = _solve_oracle(problem, args)
        env0 = LinearEnvelope(0, sup_inf(oracle, of="f/x").S)
    trace = refine(rec, env0, tol=tol, max_iter=DEFAULT_MAX_ITER)
    report = {
        "stage": "refine",
        "problem": problem.name,
        "envelope": {
            "trace_length": len(trace.envelopes),
            "collapsed": trace.collapsed,
            "c": trace.c,
        },
    }
    final = trace.envelopes[-1]
    lines = [
        f"problem: {problem.name}",
        f"initial envelope: [{float(env0.a)!r}, {float(env0.b)!r}]",
        f"status: {trace.status} after {len(trace.envelopes) - 1} steps",
        f"final envelope: [{float(final.a)!r}, {float(final.b)!r}] (width {float(final.width):.3g})",
    ]
    if trace.c is not None:
        lines.append(f"c = {trace.c!r}")
    svg_text = envelope_convergence_svg(trace) if args.svg_path else None
    _emit(args, report, lines, svg_text=svg_text)
    _write_csv(args, _trace_csv(trace))
    return EXIT_OK if trace.collapsed else EXIT_FAIL


def _cmd_solve(args) -> int:
    problem = _require_problem(args)
    gf, rep = _solve_oracle(problem, args, tol=args.tol)
    report = {
        "stage": "solve",
        "problem": problem.name,
        "oracle": {
            "converged": rep.converged,
            "iterations": rep.iterations,
            "update_norm": rep.update_norm,
            "clamps": rep.clamps,
            "extrapolations": rep.extrapolations,
        },
    }
    lines = [
        f"problem: {problem.name}",
        f"converged: {rep.converged} in {rep.iterations} iterations",
        f"update_norm = {rep.update_norm:.6g}, damping {rep.damping:g}, "
        f"clamps {rep.clamps}, extrapolations {rep.extrapolations}",
    ]
    overlay = None
    if problem.envelope_init is not None:
        overlay = LinearEnvelope(problem.envelope_init[0], problem.envelope_init[1])
    svg_text = _maybe_svg(args, gf, f"{problem.name} oracle", envelope=overlay)
    _emit(args, report, lines, svg_text=svg_text)
    if args.csv_path:
        gf.to_csv(args.csv_path)
    return EXIT_OK if rep.converged else EXIT_FAIL


def _cmd_limits(args) -> int:
    problem = _require_problem(args)
    cand = _candidate_of(args)
    if cand is None and problem.known_solution is not None:
        cand = problem.candidates()[0]
    if cand is not None:
        gf = GridFunction.from_candidate(_grid_of(problem, args), cand)
        source = cand.describe()
    else:
        gf, _ = _solve_oracle(problem, args)
        source = "grid oracle"
    panel = limits_summary(gf)
    report = {"stage": "limits", "problem": problem.name, "limits": panel}
    lines = [f"problem: {problem.name} (function: {source})"]
    for key in ("at_zero", "ratio_at_zero", "tail_ratio", "monotone_consistent"):
        lines.append(f"{key} = {panel[key]}")
    _emit(args, report, lines, svg_text=_maybe_svg(args, gf, f"{problem.name} limits"))
    if args.csv_path:
        gf.to_csv(args.csv_path)
    return EXIT_OK


def _outcome_json(outcome) -> dict:
    entry: dict = {"problem": outcome.name}
    if outcome.residual_max is not None:
        entry["residual_max"] = outcome.residual_max
        entry["residual_samples"] = outcome.residual_samples
    if outcome.envelope_status is not None:
        entry["envelope"] = {
            "status": outcome.envelope_status,
            "trace_length": None
            if outcome.envelope_steps is None
            else outcome.envelope_steps + 1,
            "collapsed": outcome.envelope_status == "collapsed-to-point",
            "c": outcome.collapse_c,
        }
    if outcome.oracle_converged is not None:
        entry["oracle"] = {
            "converged": outcome.oracle_converged,
            "iterations": outcome.oracle_iterations,
            "update_norm": outcome.oracle_update_norm,
            "clamps": outcome.oracle_clamps,
            "extrapolations": outcome.oracle_extrapolations,
        }
    limits = {
        "at_zero": outcome.at_zero,
        "ratio_at_zero": outcome.ratio_at_zero,
        "tail_ratio": outcome.tail_ratio_est,
        "monotone_consistent": outcome.monotone_consistent,
    }
    if any(v is not None for v in limits.values()):
        entry["limits"] = limits
    if outcome.messages:
        entry["messages"] = list(outcome.messages)
    return entry


def _cmd_corpus(args) -> int:
    stages = tuple(s.strip() for s in args.stages.split(",") if s.strip())
    bad = [s for s in stages if s not in STAGES]
    if bad or not stages:
        raise _UsageError(f"--stages must name a subset of {','.join(STAGES)}")
    load = load_corpus()
    for err in load.errors:
        print(f"{err.file}: {err.message}", file=sys.stderr)
    tol = args.tol if args.tol is not None else DEFAULT_RESIDUAL_TOL
    result = run_all(load, stages, seed=args.seed, samples=args.samples, tol=tol)
    report = {
        "stage": "corpus",
        "stages": list(stages),
        "passed": result.passed and not load.errors,
        "problems": [_outcome_json(o) for o in result.outcomes],
    }
    lines = [result.table()]
    if load.errors:
        lines.append(f"load errors: {len(load.errors)} (see stderr)")
    lines.append("PASS" if report["passed"] else "FAIL")
    _emit(args, report, lines)
    return EXIT_OK if report["passed"] else EXIT_FAIL


_HANDLERS = {
    "parse": _cmd_parse,
    "verify": _cmd_verify,
    "refine": _cmd_refine,
    "solve": _cmd_solve,
    "limits": _cmd_limits,
    "corpus": _cmd_corpus,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(f"usage: see 'fesqueeze {args.command} --help'", file=sys.stderr)
        print(f"fesqueeze {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FesqueezeError as exc:
        print(f"fesqueeze {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
