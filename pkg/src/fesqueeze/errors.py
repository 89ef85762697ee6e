"""Exception types shared across the package."""

from __future__ import annotations


class FesqueezeError(Exception):
    """Base class for all package-specific errors."""


class ExpressionSyntaxError(FesqueezeError):
    """Malformed expression text; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownSymbolError(ExpressionSyntaxError):
    """An identifier other than the allowed variables, f, ln, exp."""

    def __init__(self, symbol: str, offset: int):
        super().__init__(f"unknown symbol {symbol!r}", offset)
        self.symbol = symbol


class ProblemFormatError(FesqueezeError):
    """A problem file has a malformed or inconsistent key = value layout."""


class MissingKeyError(FesqueezeError):
    """A required key is absent from a problem file."""

    def __init__(self, key: str, path: str | None = None):
        where = f" in {path}" if path else ""
        super().__init__(f"missing required key {key!r}{where}")
        self.key = key


class EvaluationDomainError(FesqueezeError):
    """An argument left the domain of ln, /, or an interpolant."""


class NonFiniteError(FesqueezeError):
    """Evaluation produced an overflow, a pole, or a NaN."""


class NotSolvableForPivotError(FesqueezeError):
    """The relation cannot be rearranged for the designated f-occurrence."""


class SolveDivergedError(FesqueezeError):
    """The damped fixed-point iteration diverged."""


class UnsupportedShapeError(FesqueezeError):
    """The relation falls outside the restricted envelope-derivation scheme."""


class OrderViolationError(FesqueezeError):
    """A refinement step produced a lower bound above the upper bound."""


class NotBracketingError(FesqueezeError):
    """The two squeeze traces are not ordered lower <= upper at some index."""

    def __init__(self, index: int):
        super().__init__(f"lower trace exceeds upper trace at index {index}")
        self.index = index


class LimitsDisagreeError(FesqueezeError):
    """Both squeeze traces converged but to different limits."""


class TraceNotConvergedError(FesqueezeError):
    """A squeeze trace did not classify as converged."""


class AmbiguousFixedPointError(FesqueezeError):
    """More than one fixed point satisfies the selection constraint."""


class NoSatisfyingFixedPointError(FesqueezeError):
    """No fixed point satisfies the selection constraint."""


class EmptyWindowError(FesqueezeError):
    """A sup/inf window contains no grid points."""


class NotMonotoneNearPointError(FesqueezeError):
    """The grid function is not monotone near the requested point."""


class BoundaryPointError(FesqueezeError):
    """A derivative was requested at or beyond the grid boundary."""
