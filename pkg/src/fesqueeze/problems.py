"""Problem files: key = value text specs for functional-equation problems.

Format (UTF-8, one `key = value` per line, `#` starts a comment):

    name            display name (required)
    domain          R+ | R | R0+        (default R+)
    relation        functional relation (repeatable; at least one required)
    known_solution  closed form in x, may use parameters c, d (optional)
    solution_params parameter bindings like `c=1/2` or `c=2, d=-3`
                    (repeatable; each line is one member of the solution family)
    envelope_lower_map / envelope_upper_map   update expressions in a, b
    envelope_init_lower / envelope_init_upper initial envelope coefficients
    notes           free text
    grid_min / grid_max / grid_points          solver grid hints
    solve           true|false  mark the problem as solvable by the grid oracle
    solve_init      initial iterate for the solver (closed form in x)
    pivot           index of the f(x) occurrence to isolate (default 0)
    damping         solver damping override
    sample_order    comma list of variables that must be sampled in
                    strictly increasing order (e.g. x,y,z)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .errors import MissingKeyError, ProblemFormatError
from .expr import (
    CandidateFunction,
    Expr,
    FunctionalRelation,
    Number,
    parse_candidate_expression,
    parse_map_expression,
    parse_relation,
)

_DOMAINS = ("R+", "R", "R0+")
_REPEATABLE = ("relation", "solution_params")


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: str
    relations: tuple[FunctionalRelation, ...]
    known_solution: Expr | None = None
    solution_params: tuple[Mapping[str, Number], ...] = ()
    envelope_lower_map: Expr | None = None
    envelope_upper_map: Expr | None = None
    envelope_init: tuple[Number, Number] | None = None
    notes: str = ""
    grid_min: float | None = None
    grid_max: float | None = None
    grid_points: int | None = None
    solve: bool = False
    solve_init: str | None = None
    pivot: int = 0
    damping: float | None = None
    sample_order: tuple[str, ...] | None = None

    def candidates(self) -> tuple[CandidateFunction, ...]:
        """The known-solution family, one CandidateFunction per parameter set."""
        if self.known_solution is None:
            return ()
        params = self.solution_params or ({},)
        return tuple(CandidateFunction(self.known_solution, dict(p)) for p in params)

    @property
    def variables(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for rel in self.relations:
            out |= rel.variables
        return out


def _parse_number(text: str, key: str) -> Number:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        pass
    try:
        return float(text)
    except ValueError:
        raise ProblemFormatError(f"key {key}: expected a number, got {text!r}") from None


def _parse_params(text: str, key: str) -> dict[str, Number]:
    out: dict[str, Number] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ProblemFormatError(f"key {key}: expected name=value pairs, got {part!r}")
        name, _, value = part.partition("=")
        name = name.strip()
        if name not in ("c", "d"):
            raise ProblemFormatError(f"key {key}: unknown parameter {name!r} (expected c or d)")
        out[name] = _parse_number(value.strip(), key)
    if not out:
        raise ProblemFormatError(f"key {key}: empty parameter list")
    return out


def _parse_bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ProblemFormatError(f"key {key}: expected true or false, got {text!r}")


def _coerce(conv, text: str, key: str):
    try:
        return conv(text)
    except ValueError:
        raise ProblemFormatError(f"key {key}: could not parse {text!r}") from None


def parse_problem(text: str) -> ProblemSpec:
    """Parse a problem file body into a ProblemSpec.

    Raises MissingKeyError for absent required keys (name, relation),
    ProblemFormatError for malformed keys or values, and forwards
    expression syntax errors from the relation grammar.
    """
    singles: dict[str, str] = {}
    multis: dict[str, list[str]] = {k: [] for k in _REPEATABLE}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProblemFormatError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in _REPEATABLE:
            multis[key].append(value)
        elif key in singles:
            raise ProblemFormatError(f"line {lineno}: duplicate key {key!r}")
        else:
            singles[key] = value

    if "name" not in singles:
        raise MissingKeyError("name")
    if not multis["relation"]:
        raise MissingKeyError("relation")
    domain = singles.pop("domain", "R+")
    if domain not in _DOMAINS:
        raise ProblemFormatError(f"unknown domain {domain!r} (expected one of {_DOMAINS})")

    relations = tuple(parse_relation(r, domain=domain) for r in multis["relation"])
    known = singles.pop("known_solution", None)
    known_expr = parse_candidate_expression(known) if known is not None else None
    params = tuple(_parse_params(p, "solution_params") for p in multis["solution_params"])
    if params and known_expr is None:
        raise ProblemFormatError("solution_params given without known_solution")

    lower = singles.pop("envelope_lower_map", None)
    upper = singles.pop("envelope_upper_map", None)
    if (lower is None) != (upper is None):
        raise MissingKeyError("envelope_lower_map and envelope_upper_map must come together")
    init_lower = singles.pop("envelope_init_lower", None)
    init_upper = singles.pop("envelope_init_upper", None)
    if (init_lower is None) != (init_upper is None):
        raise MissingKeyError("envelope_init_lower and envelope_init_upper must come together")
    envelope_init = None
    if init_lower is not None:
        envelope_init = (
            _parse_number(init_lower, "envelope_init_lower"),
            _parse_number(init_upper, "envelope_init_upper"),
        )

    order = singles.pop("sample_order", None)
    sample_order = None
    if order is not None:
        sample_order = tuple(v.strip() for v in order.split(",") if v.strip())
        for v in sample_order:
            if v not in ("x", "y", "z"):
                raise ProblemFormatError(f"sample_order: unknown variable {v!r}")

    solve_init = singles.pop("solve_init", None)
    if solve_init is not None:
        parse_candidate_expression(solve_init)  # validate eagerly

    spec = ProblemSpec(
        name=singles.pop("name"),
        domain=domain,
        relations=relations,
        known_solution=known_expr,
        solution_params=params,
        envelope_lower_map=parse_map_expression(lower) if lower is not None else None,
        envelope_upper_map=parse_map_expression(upper) if upper is not None else None,
        envelope_init=envelope_init,
        notes=singles.pop("notes", ""),
        grid_min=_coerce(float, singles.pop("grid_min"), "grid_min")
        if "grid_min" in singles
        else None,
        grid_max=_coerce(float, singles.pop("grid_max"), "grid_max")
        if "grid_max" in singles
        else None,
        grid_points=_coerce(int, singles.pop("grid_points"), "grid_points")
        if "grid_points" in singles
        else None,
        solve=_parse_bool(singles.pop("solve"), "solve") if "solve" in singles else False,
        solve_init=solve_init,
        pivot=_coerce(int, singles.pop("pivot"), "pivot") if "pivot" in singles else 0,
        damping=_coerce(float, singles.pop("damping"), "damping")
        if "damping" in singles
        else None,
        sample_order=sample_order,
    )
    if singles:
        raise ProblemFormatError(f"unknown keys: {sorted(singles)}")
    try:
        for cand in spec.candidates():
            del cand  # construction alone validates parameter completeness
    except ValueError as exc:
        raise ProblemFormatError(f"known_solution: {exc}") from None
    return spec


def load_problem_file(path) -> ProblemSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_problem(fh.read())
