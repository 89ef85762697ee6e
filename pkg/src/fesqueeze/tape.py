"""Flatten expression trees into postfix instruction tapes.

The tape form lets the kernels evaluate an expression over whole arrays of
sample bindings without walking Python objects per element.  Opcodes are
shared between the pure numpy backend and the compiled extension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as E

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_POW = 7
OP_LN = 8
OP_EXP = 9
OP_FAPP = 10
OP_FPRIME = 11
OP_FINV = 12

DEFAULT_VAR_SLOTS = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class Tape:
    codes: np.ndarray  # int32
    iargs: np.ndarray  # int64 (const index, var slot, or exponent)
    consts: np.ndarray  # float64
    max_stack: int
    has_f: bool
    has_fprime: bool
    has_finv: bool


def compile_tape(e: E.Expr, var_slots: dict[str, int] | None = None) -> Tape:
    """Compile an expression into a postfix tape.

    Rational constants are demoted to float64; exact paths that need them
    use the tree-walk evaluator instead.
    """
    slots = DEFAULT_VAR_SLOTS if var_slots is None else var_slots
    codes: list[int] = []
    iargs: list[int] = []
    consts: list[float] = []

    def emit(node: E.Expr) -> int:
        if isinstance(node, E.Const):
            codes.append(OP_CONST)
            iargs.append(len(consts))
            consts.append(float(node.value))
            return 1
        if isinstance(node, E.Var):
            try:
                slot = slots[node.name]
            except KeyError:
                raise ValueError(f"variable {node.name!r} has no tape slot") from None
            codes.append(OP_VAR)
            iargs.append(slot)
            return 1
        if isinstance(node, E.BinOp):
            d1 = emit(node.left)
            d2 = emit(node.right)
            codes.append({"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}[node.op])
            iargs.append(0)
            return max(d1, 1 + d2)
        if isinstance(node, E.Neg):
            d = emit(node.operand)
            codes.append(OP_NEG)
            iargs.append(0)
            return d
        if isinstance(node, E.Pow):
            d = emit(node.base)
            codes.append(OP_POW)
            iargs.append(node.exponent)
            return d
        if isinstance(node, E.Ln):
            d = emit(node.arg)
            codes.append(OP_LN)
            iargs.append(0)
            return d
        if isinstance(node, E.Exp):
            d = emit(node.arg)
            codes.append(OP_EXP)
            iargs.append(0)
            return d
        if isinstance(node, E.FApp):
            d = emit(node.arg)
            codes.append(OP_FAPP)
            iargs.append(0)
            return d
        if isinstance(node, E.FPrime):
            d = emit(node.arg)
            codes.append(OP_FPRIME)
            iargs.append(0)
            return d
        if isinstance(node, E.FInv):
            d = emit(node.arg)
            codes.append(OP_FINV)
            iargs.append(0)
            return d
        raise TypeError(f"not an expression node: {node!r}")

    depth = emit(e)
    code_arr = np.asarray(codes, dtype=np.int32)
    return Tape(
        codes=code_arr,
        iargs=np.asarray(iargs, dtype=np.int64),
        consts=np.asarray(consts, dtype=np.float64),
        max_stack=depth,
        has_f=bool(np.any(code_arr == OP_FAPP)),
        has_fprime=bool(np.any(code_arr == OP_FPRIME)),
        has_finv=bool(np.any(code_arr == OP_FINV)),
    )
