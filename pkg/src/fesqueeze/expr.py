"""Expression trees for functional equations in up to three variables.

The grammar (whitespace-insensitive)::

    relation := expr ("=" | ">=") expr
    expr     := term (("+" | "-") term)*
    term     := factor (("*" | "/") factor)*
    factor   := base ("^" integer)?
    base     := number | variable | "f" "(" expr ")" | "f'" "(" expr ")"
              | "ln" "(" expr ")" | "exp" "(" expr ")" | "(" expr ")" | "-" base

Numeric literals are stored as exact rationals; purely rational
subexpressions are folded at parse time, so ``2/3`` is the constant 2/3.
``f`` is the single unknown function and ``f'`` its derivative; any other
identifier raises UnknownSymbolError.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Union

from .errors import (
    EvaluationDomainError,
    ExpressionSyntaxError,
    NonFiniteError,
    UnknownSymbolError,
)

Rational = Union[int, Fraction]
Number = Union[int, float, Fraction]
Binding = Mapping[str, Number]

DEFAULT_VARIABLES = ("x", "y", "z")
CANDIDATE_VARIABLES = ("x", "c", "d")
MAP_VARIABLES = ("a", "b")


@dataclass(frozen=True, slots=True)
class Const:
    value: Number


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class BinOp:
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Neg:
    operand: Expr


@dataclass(frozen=True, slots=True)
class Pow:
    base: Expr
    exponent: int


@dataclass(frozen=True, slots=True)
class FApp:
    arg: Expr


@dataclass(frozen=True, slots=True)
class FPrime:
    arg: Expr


@dataclass(frozen=True, slots=True)
class FInv:
    """Inverse application f^{-1}(arg); internal to the solver, not parseable."""

    arg: Expr


@dataclass(frozen=True, slots=True)
class Ln:
    arg: Expr


@dataclass(frozen=True, slots=True)
class Exp:
    arg: Expr


Expr = Union[Const, Var, BinOp, Neg, Pow, FApp, FPrime, FInv, Ln, Exp]


# ---------------------------------------------------------------------------
# parsing


_TOKEN_RE = re.compile(
    r"(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*'?)"
    r"|(?P<op>>=|[-+*/^()=])"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


def _is_rational(v: Number) -> bool:
    return isinstance(v, (int, Fraction))


def _fold_neg(operand: Expr) -> Expr:
    if isinstance(operand, Const) and _is_rational(operand.value):
        return Const(-Fraction(operand.value))
    return Neg(operand)


def _fold_pow(base: Expr, exponent: int, offset: int) -> Expr:
    if isinstance(base, Const) and _is_rational(base.value):
        if base.value == 0 and exponent < 0:
            raise ExpressionSyntaxError("zero raised to a negative power", offset)
        return Const(Fraction(base.value) ** exponent)
    return Pow(base, exponent)


def _fold_binop(op: str, left: Expr, right: Expr, offset: int) -> Expr:
    if op == "/" and isinstance(right, Const) and right.value == 0:
        raise ExpressionSyntaxError("division by the constant zero", offset)
    if (
        isinstance(left, Const)
        and isinstance(right, Const)
        and _is_rational(left.value)
        and _is_rational(right.value)
    ):
        a, b = Fraction(left.value), Fraction(right.value)
        if op == "+":
            return Const(a + b)
        if op == "-":
            return Const(a - b)
        if op == "*":
            return Const(a * b)
        return Const(a / b)
    if op in "+-":
        # canonicalize "x+-y" to "x-y" (and dually) so unparse can print
        # the sign inside the operator
        flipped = "-" if op == "+" else "+"
        if isinstance(right, Neg):
            return _fold_binop(flipped, left, right.operand, offset)
        if isinstance(right, Const) and _is_rational(right.value) and right.value < 0:
            return _fold_binop(flipped, left, Const(-Fraction(right.value)), offset)
    return BinOp(op, left, right)


class _Parser:
    def __init__(self, tokens, variables, allow_f, allow_fprime):
        self.tokens = tokens
        self.i = 0
        self.variables = variables
        self.allow_f = allow_f
        self.allow_fprime = allow_fprime

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, offset = self.peek()
        if kind != "op" or text != op:
            raise ExpressionSyntaxError(f"expected {op!r}", offset)
        return self.advance()

    def at_op(self, *ops: str) -> bool:
        kind, text, _ = self.peek()
        return kind == "op" and text in ops

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.at_op("+", "-"):
            _, op, offset = self.advance()
            node = _fold_binop(op, node, self.parse_term(), offset)
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.at_op("*", "/"):
            _, op, offset = self.advance()
            node = _fold_binop(op, node, self.parse_factor(), offset)
        return node

    def parse_factor(self) -> Expr:
        node = self.parse_base()
        if self.at_op("^"):
            _, _, offset = self.advance()
            sign = 1
            if self.at_op("-"):
                self.advance()
                sign = -1
            kind, text, off2 = self.peek()
            if kind != "num" or not text.isdigit():
                raise ExpressionSyntaxError("exponent must be an integer", off2)
            self.advance()
            node = _fold_pow(node, sign * int(text), offset)
        return node

    def parse_base(self) -> Expr:
        kind, text, offset = self.advance()
        if kind == "num":
            return Const(Fraction(text))
        if kind == "op" and text == "-":
            return _fold_neg(self.parse_base())
        if kind == "op" and text == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        if kind == "ident":
            return self.parse_ident(text, offset)
        raise ExpressionSyntaxError(f"unexpected token {text!r}", offset)

    def parse_ident(self, text: str, offset: int) -> Expr:
        if text == "f":
            if not self.allow_f:
                raise UnknownSymbolError("f", offset)
            return FApp(self.parse_call_arg())
        if text == "f'":
            if not (self.allow_f and self.allow_fprime):
                raise UnknownSymbolError("f'", offset)
            return FPrime(self.parse_call_arg())
        if text == "ln":
            return Ln(self.parse_call_arg())
        if text == "exp":
            return Exp(self.parse_call_arg())
        if text in self.variables:
            return Var(text)
        raise UnknownSymbolError(text, offset)

    def parse_call_arg(self) -> Expr:
        self.expect_op("(")
        node = self.parse_expr()
        self.expect_op(")")
        return node


def parse_expression(
    text: str,
    *,
    variables: tuple[str, ...] = DEFAULT_VARIABLES,
    allow_f: bool = True,
    allow_fprime: bool = True,
) -> Expr:
    """Parse a single expression; raises ExpressionSyntaxError/UnknownSymbolError."""
    parser = _Parser(_tokenize(text), variables, allow_f, allow_fprime)
    node = parser.parse_expr()
    kind, tok, offset = parser.peek()
    if kind != "end":
        raise ExpressionSyntaxError(f"trailing input {tok!r}", offset)
    return node


def parse_candidate_expression(text: str) -> Expr:
    """Parse a closed form in x with optional parameters c, d (no f allowed)."""
    return parse_expression(text, variables=CANDIDATE_VARIABLES, allow_f=False)


def parse_map_expression(text: str, variables: tuple[str, ...] = MAP_VARIABLES) -> Expr:
    """Parse an update map in the state variables (a) or (a, b)."""
    return parse_expression(text, variables=variables, allow_f=False)


# ---------------------------------------------------------------------------
# relations


@dataclass(frozen=True, slots=True)
class FunctionalRelation:
    """lhs = rhs or lhs >= rhs, over variables drawn from {x, y, z}."""

    lhs: Expr
    rhs: Expr
    kind: str = "eq"  # "eq" | "ge"
    domain: str = "R+"  # "R+" | "R" | "R0+"

    def __post_init__(self):
        if self.kind not in ("eq", "ge"):
            raise ValueError(f"relation kind must be 'eq' or 'ge', got {self.kind!r}")
        if self.domain not in ("R+", "R", "R0+"):
            raise ValueError(f"unknown domain tag {self.domain!r}")

    @property
    def variables(self) -> frozenset[str]:
        return free_variables(self.lhs) | free_variables(self.rhs)

    def unparse(self) -> str:
        op = "=" if self.kind == "eq" else ">="
        return f"{unparse(self.lhs)} {op} {unparse(self.rhs)}"


def parse_relation(text: str, *, domain: str = "R+") -> FunctionalRelation:
    """Parse ``expr (= | >=) expr`` into a FunctionalRelation."""
    tokens = _tokenize(text)
    parser = _Parser(tokens, DEFAULT_VARIABLES, True, True)
    lhs = parser.parse_expr()
    kind_tok, text_tok, offset = parser.peek()
    if kind_tok != "op" or text_tok not in ("=", ">="):
        raise ExpressionSyntaxError("expected '=' or '>='", offset)
    parser.advance()
    rhs = parser.parse_expr()
    kind2, tok2, offset2 = parser.peek()
    if kind2 != "end":
        raise ExpressionSyntaxError(f"trailing input {tok2!r}", offset2)
    kind = "eq" if text_tok == "=" else "ge"
    return FunctionalRelation(lhs, rhs, kind, domain)


# ---------------------------------------------------------------------------
# printing


_ATOMS = (Var, FApp, FPrime, FInv, Ln, Exp)


def _prec(e: Expr) -> int:
    """Effective precedence of the printed form: 1 additive, 2 multiplicative,
    3 power/negation, 4 atomic."""
    if isinstance(e, BinOp):
        return 1 if e.op in "+-" else 2
    if isinstance(e, Const):
        v = e.value
        if _is_rational(v):
            v = Fraction(v)
            if v.denominator != 1:
                return 2  # prints as p/q
            return 3 if v < 0 else 4
        return 3 if v < 0 else 4
    if isinstance(e, (Neg, Pow)):
        return 3
    return 4


def _const_text(v: Number) -> str:
    if isinstance(v, float):
        v = Fraction(v)  # exact binary expansion; compares equal on re-parse
    v = Fraction(v)
    return str(v)


def unparse(e: Expr) -> str:
    """Canonical text form; re-parsing yields a structurally identical AST
    for any tree the parser itself can produce."""
    if isinstance(e, Const):
        return _const_text(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, FApp):
        return f"f({unparse(e.arg)})"
    if isinstance(e, FPrime):
        return f"f'({unparse(e.arg)})"
    if isinstance(e, FInv):
        return f"finv({unparse(e.arg)})"
    if isinstance(e, Ln):
        return f"ln({unparse(e.arg)})"
    if isinstance(e, Exp):
        return f"exp({unparse(e.arg)})"
    if isinstance(e, Neg):
        inner = unparse(e.operand)
        if not (isinstance(e.operand, _ATOMS) or isinstance(e.operand, Neg)):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        inner = unparse(e.base)
        if isinstance(e.base, _ATOMS):
            plain = True
        elif isinstance(e.base, Const) and _is_rational(e.base.value):
            v = Fraction(e.base.value)
            plain = v >= 0 and v.denominator == 1
        else:
            plain = False
        if not plain:
            inner = f"({inner})"
        return f"{inner}^{e.exponent}"
    if isinstance(e, BinOp):
        op = e.op
        rnode = e.right
        if op in "+-":
            # print the sign inside the operator, mirroring the parser's
            # canonicalization of "x+-y"
            if isinstance(rnode, Neg):
                op = "-" if op == "+" else "+"
                rnode = rnode.operand
            elif isinstance(rnode, Const) and _is_rational(rnode.value) and rnode.value < 0:
                op = "-" if op == "+" else "+"
                rnode = Const(-Fraction(rnode.value))
        p = _prec(e)
        left = unparse(e.left)
        right = unparse(rnode)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(rnode) <= p:
            right = f"({right})"
        return f"{left}{op}{right}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# traversal and substitution


def iter_nodes(e: Expr) -> Iterator[Expr]:
    """Pre-order, left-to-right traversal."""
    yield e
    if isinstance(e, BinOp):
        yield from iter_nodes(e.left)
        yield from iter_nodes(e.right)
    elif isinstance(e, Neg):
        yield from iter_nodes(e.operand)
    elif isinstance(e, Pow):
        yield from iter_nodes(e.base)
    elif isinstance(e, (FApp, FPrime, FInv, Ln, Exp)):
        yield from iter_nodes(e.arg)


def free_variables(e: Expr) -> frozenset[str]:
    return frozenset(n.name for n in iter_nodes(e) if isinstance(n, Var))


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions, rebuilding only what changes."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    if isinstance(e, FApp):
        return FApp(substitute(e.arg, mapping))
    if isinstance(e, FPrime):
        return FPrime(substitute(e.arg, mapping))
    if isinstance(e, FInv):
        return FInv(substitute(e.arg, mapping))
    if isinstance(e, Ln):
        return Ln(substitute(e.arg, mapping))
    if isinstance(e, Exp):
        return Exp(substitute(e.arg, mapping))
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# evaluation


_HUGE = 1e306


def _check_finite(v: Number) -> Number:
    if isinstance(v, float) and not math.isfinite(v):
        raise NonFiniteError("evaluation produced a non-finite value")
    return v


def evaluate(e: Expr, env: Binding, interp: Callable[[float], float] | None = None) -> Number:
    """Evaluate an expression tree at a variable binding.

    Rational subresults stay exact; ln and exp force floats.  ``interp``
    interprets f (a CandidateFunction, a GridFunction, or any callable);
    f' uses ``interp.derivative`` when present, else a central difference,
    and the internal inverse node requires ``interp.inverse``.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvaluationDomainError(f"unbound variable {e.name!r}") from None
    if isinstance(e, BinOp):
        left = evaluate(e.left, env, interp)
        right = evaluate(e.right, env, interp)
        try:
            if e.op == "+":
                return _check_finite(left + right)
            if e.op == "-":
                return _check_finite(left - right)
            if e.op == "*":
                return _check_finite(left * right)
            return _check_finite(left / right)
        except ZeroDivisionError:
            raise NonFiniteError("division by zero") from None
        except OverflowError:
            raise NonFiniteError("overflow") from None
    if isinstance(e, Neg):
        return -evaluate(e.operand, env, interp)
    if isinstance(e, Pow):
        base = evaluate(e.base, env, interp)
        try:
            return _check_finite(base**e.exponent)
        except ZeroDivisionError:
            raise NonFiniteError("zero raised to a negative power") from None
        except OverflowError:
            raise NonFiniteError("overflow in power") from None
    if isinstance(e, Ln):
        v = evaluate(e.arg, env, interp)
        if v <= 0:
            raise EvaluationDomainError("ln of a non-positive value")
        return math.log(v)
    if isinstance(e, Exp):
        v = float(evaluate(e.arg, env, interp))
        if v > 709.0:
            raise NonFiniteError("overflow in exp")
        return math.exp(v)
    if isinstance(e, FApp):
        if interp is None:
            raise EvaluationDomainError("expression contains f but no interpretation given")
        return _check_finite(interp(evaluate(e.arg, env, interp)))
    if isinstance(e, FPrime):
        if interp is None:
            raise EvaluationDomainError("expression contains f' but no interpretation given")
        t = evaluate(e.arg, env, interp)
        deriv = getattr(interp, "derivative", None)
        if deriv is not None:
            return _check_finite(deriv(t))
        h = 1e-6 * (1.0 + abs(float(t)))
        return _check_finite((interp(float(t) + h) - interp(float(t) - h)) / (2.0 * h))
    if isinstance(e, FInv):
        inv = getattr(interp, "inverse", None)
        if inv is None:
            raise EvaluationDomainError("interpretation provides no inverse")
        return _check_finite(inv(evaluate(e.arg, env, interp)))
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# symbolic derivative of closed forms


def differentiate(e: Expr, var: str = "x") -> Expr:
    """Exact derivative of an f-free expression with respect to ``var``."""
    zero = Const(Fraction(0))
    one = Const(Fraction(1))
    if isinstance(e, Const):
        return zero
    if isinstance(e, Var):
        return one if e.name == var else zero
    if isinstance(e, Neg):
        return _mk_neg(differentiate(e.operand, var))
    if isinstance(e, BinOp):
        dl = differentiate(e.left, var)
        dr = differentiate(e.right, var)
        if e.op == "+":
            return _mk_add(dl, dr)
        if e.op == "-":
            return _mk_sub(dl, dr)
        if e.op == "*":
            return _mk_add(_mk_mul(dl, e.right), _mk_mul(e.left, dr))
        num = _mk_sub(_mk_mul(dl, e.right), _mk_mul(e.left, dr))
        return _mk_div(num, Pow(e.right, 2))
    if isinstance(e, Pow):
        db = differentiate(e.base, var)
        coeff = Const(Fraction(e.exponent))
        inner = Pow(e.base, e.exponent - 1) if e.exponent != 1 else one
        return _mk_mul(_mk_mul(coeff, inner), db)
    if isinstance(e, Ln):
        return _mk_div(differentiate(e.arg, var), e.arg)
    if isinstance(e, Exp):
        return _mk_mul(e, differentiate(e.arg, var))
    raise ValueError("cannot differentiate an expression containing f")


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1


def _mk_neg(e: Expr) -> Expr:
    return Const(Fraction(0)) if _is_zero(e) else _fold_neg(e)


def _mk_add(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return _fold_binop("+", a, b, 0)


def _mk_sub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return _mk_neg(b)
    return _fold_binop("-", a, b, 0)


def _mk_mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return Const(Fraction(0))
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return _fold_binop("*", a, b, 0)


def _mk_div(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return Const(Fraction(0))
    if _is_one(b):
        return a
    return _fold_binop("/", a, b, 0)


# ---------------------------------------------------------------------------
# candidate functions and residuals


@dataclass(frozen=True)
class CandidateFunction:
    """A closed form in x with optional rational/real parameters c, d."""

    expr: Expr
    params: Mapping[str, Number] = field(default_factory=dict)

    def __post_init__(self):
        names = free_variables(self.expr)
        unbound = names - {"x"} - set(self.params)
        if unbound:
            raise ValueError(f"candidate has unbound parameters {sorted(unbound)}")
        if any(isinstance(n, (FApp, FPrime, FInv)) for n in iter_nodes(self.expr)):
            raise ValueError("candidate functions must be f-free closed forms")

    def __call__(self, t: Number) -> Number:
        env = dict(self.params)
        env["x"] = t
        return evaluate(self.expr, env)

    def derivative(self, t: Number) -> Number:
        env = dict(self.params)
        env["x"] = t
        return evaluate(self._dexpr, env)

    @property
    def _dexpr(self) -> Expr:
        cached = getattr(self, "_dexpr_cache", None)
        if cached is None:
            cached = differentiate(self.expr, "x")
            object.__setattr__(self, "_dexpr_cache", cached)
        return cached

    def bound_expr(self) -> Expr:
        """The expression with parameters substituted by constants."""
        mapping = {k: Const(v) for k, v in self.params.items()}
        return substitute(self.expr, mapping)

    def bound_derivative_expr(self) -> Expr:
        """The x-derivative with parameters substituted by constants."""
        mapping = {k: Const(v) for k, v in self.params.items()}
        return substitute(self._dexpr, mapping)

    def describe(self) -> str:
        return unparse(self.bound_expr())


def parse_candidate(text: str, params: Mapping[str, Number] | None = None) -> CandidateFunction:
    return CandidateFunction(parse_candidate_expression(text), dict(params or {}))


def residual(rel: FunctionalRelation, env: Binding, interp=None) -> Number:
    """Signed defect of the relation at a binding.

    Equalities return lhs - rhs; inequalities (lhs >= rhs) return
    max(0, rhs - lhs), so feasible points give exactly zero.
    """
    lhs = evaluate(rel.lhs, env, interp)
    rhs = evaluate(rel.rhs, env, interp)
    if rel.kind == "eq":
        return lhs - rhs
    gap = rhs - lhs
    return gap if gap > 0 else 0 * gap
