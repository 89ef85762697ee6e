"""Numerical toolbox for squeeze arguments on functional equations.

Mechanizes the standard bag of tricks for functional equations over the
positive reals: bounding-sequence recurrences, linear envelope refinement,
grid fixed-point oracles, sup/inf and one-sided-limit estimation, and
derivative-relation residual checks, all verified against closed forms.
"""

from __future__ import annotations

from .expr import (
    BinOp,
    CandidateFunction,
    Const,
    Exp,
    FApp,
    FPrime,
    FunctionalRelation,
    Ln,
    Neg,
    Pow,
    Var,
    differentiate,
    evaluate,
    free_variables,
    parse_candidate,
    parse_expression,
    parse_relation,
    residual,
    substitute,
    unparse,
)

__version__ = "0.1.0"

__all__ = [
    "BinOp",
    "CandidateFunction",
    "Const",
    "Exp",
    "FApp",
    "FPrime",
    "FunctionalRelation",
    "Ln",
    "Neg",
    "Pow",
    "Var",
    "differentiate",
    "evaluate",
    "free_variables",
    "parse_candidate",
    "parse_expression",
    "parse_relation",
    "residual",
    "substitute",
    "unparse",
    "__version__",
]
