"""Pure numpy implementation of the kernel backend."""

from __future__ import annotations

import numpy as np

from ..tape import (
    OP_ADD,
    OP_CONST,
    OP_DIV,
    OP_EXP,
    OP_FAPP,
    OP_FINV,
    OP_FPRIME,
    OP_LN,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SUB,
    OP_VAR,
)

_SNAP = 1e-9  # relative snap distance for "query sits on a grid point"


def grid_interp(q, mode, extrapolate, xs, ys, lxs, lys):
    n = xs.shape[0]
    with np.errstate(all="ignore"):
        if mode == 1:  # linear in log-log
            bad = ~(q > 0)
            lq = np.log(np.where(bad, 1.0, q))
            j = np.clip(np.searchsorted(xs, q, side="left") - 1, 0, n - 2)
            w = (lq - lxs[j]) / (lxs[j + 1] - lxs[j])
            vals = np.exp((1.0 - w) * lys[j] + w * lys[j + 1])
            vals = np.where(bad, np.nan, vals)
            outside = ((q < xs[0]) | (q > xs[-1])) & ~bad
        else:  # linear spacing, linear interpolation
            j = np.clip(np.searchsorted(xs, q, side="left") - 1, 0, n - 2)
            w = (q - xs[j]) / (xs[j + 1] - xs[j])
            vals = (1.0 - w) * ys[j] + w * ys[j + 1]
            outside = (q < xs[0]) | (q > xs[-1])
        if extrapolate:
            n_extrap = int(np.count_nonzero(outside))
        else:
            n_extrap = 0
            vals = np.where(outside, np.nan, vals)
    return vals, n_extrap


def grid_derivative(q, mode, xs, ys, lxs, lys):
    n = xs.shape[0]
    with np.errstate(all="ignore"):
        k = np.searchsorted(xs, q, side="left")
        near = np.clip(k, 0, n - 1)
        alt = np.clip(k - 1, 0, n - 1)
        near = np.where(
            np.abs(q - xs[alt]) < np.abs(q - xs[near]), alt, near
        )
        scale = np.abs(xs[near]) + np.abs(q)
        snapped = np.abs(q - xs[near]) <= _SNAP * scale
        j1 = np.where(snapped, near - 1, np.clip(k - 1, 0, n - 2))
        j2 = np.where(snapped, near + 1, np.clip(k - 1, 0, n - 2) + 1)
        bad = (q < xs[0]) | (q > xs[-1]) | (j1 < 0) | (j2 > n - 1)
        j1 = np.clip(j1, 0, n - 1)
        j2 = np.clip(j2, 0, n - 1)
        if mode == 1:
            s = (lys[j2] - lys[j1]) / (lxs[j2] - lxs[j1])
            fhat, _ = grid_interp(q, mode, 1, xs, ys, lxs, lys)
            vals = s * fhat / q
        else:
            vals = (ys[j2] - ys[j1]) / (xs[j2] - xs[j1])
        vals = np.where(bad, np.nan, vals)
    return vals


def _apply_f(argv, fkind, fmode, fextrap, xs, ys, lxs, lys,
             ccodes, ciargs, cconsts, cmax):
    if fkind == 1:
        return grid_interp(argv, fmode, fextrap, xs, ys, lxs, lys)
    if fkind == 3:
        out, _ = eval_tape(
            ccodes, ciargs, cconsts, cmax, argv, argv, argv,
            0, 1, 1,
            xs, ys, lxs, lys, xs, ys, lxs, lys,
            ccodes, ciargs, cconsts, cmax, ccodes, ciargs, cconsts, cmax,
        )
        return out, 0
    return np.full_like(argv, np.nan), 0


def eval_tape(codes, iargs, consts, max_stack, xv, yv, zv,
              fkind, fmode, fextrap,
              xs, ys, lxs, lys, ixs, iys, lixs, liys,
              ccodes, ciargs, cconsts, cmax,
              dcodes, diargs, dconsts, dmax):
    n = xv.shape[0]
    stack = np.empty((max(max_stack, 1), n), dtype=np.float64)
    sp = 0
    n_extrap = 0
    variables = (xv, yv, zv)
    with np.errstate(all="ignore"):
        for i in range(codes.shape[0]):
            op = codes[i]
            ia = iargs[i]
            if op == OP_CONST:
                stack[sp] = consts[ia]
                sp += 1
            elif op == OP_VAR:
                stack[sp] = variables[ia]
                sp += 1
            elif op == OP_ADD:
                sp -= 1
                stack[sp - 1] += stack[sp]
            elif op == OP_SUB:
                sp -= 1
                stack[sp - 1] -= stack[sp]
            elif op == OP_MUL:
                sp -= 1
                stack[sp - 1] *= stack[sp]
            elif op == OP_DIV:
                sp -= 1
                stack[sp - 1] /= stack[sp]
            elif op == OP_NEG:
                np.negative(stack[sp - 1], out=stack[sp - 1])
            elif op == OP_POW:
                stack[sp - 1] = stack[sp - 1] ** int(ia)
            elif op == OP_LN:
                top = stack[sp - 1]
                stack[sp - 1] = np.where(top > 0, np.log(np.where(top > 0, top, 1.0)), np.nan)
            elif op == OP_EXP:
                stack[sp - 1] = np.exp(stack[sp - 1])
            elif op == OP_FAPP:
                vals, ne = _apply_f(stack[sp - 1], fkind, fmode, fextrap,
                                    xs, ys, lxs, lys, ccodes, ciargs, cconsts, cmax)
                stack[sp - 1] = vals
                n_extrap += ne
            elif op == OP_FPRIME:
                if fkind == 1:
                    stack[sp - 1] = grid_derivative(stack[sp - 1], fmode, xs, ys, lxs, lys)
                elif fkind == 3 and dmax > 0:
                    argv = stack[sp - 1]
                    out, _ = eval_tape(
                        dcodes, diargs, dconsts, dmax, argv, argv, argv,
                        0, 1, 1,
                        xs, ys, lxs, lys, ixs, iys, lixs, liys,
                        dcodes, diargs, dconsts, dmax,
                        dcodes, diargs, dconsts, dmax,
                    )
                    stack[sp - 1] = out
                else:
                    stack[sp - 1] = np.nan
            elif op == OP_FINV:
                if fkind == 1 and ixs.shape[0] > 0:
                    vals, ne = grid_interp(stack[sp - 1], fmode, fextrap,
                                           ixs, iys, lixs, liys)
                    stack[sp - 1] = vals
                    n_extrap += ne
                else:
                    stack[sp - 1] = np.nan
    return stack[0].copy(), n_extrap
