# cython: language_level=3
"""Compiled kernel backend; mirrors pure.py operation for operation."""

cimport cython
from libc.math cimport exp, fabs, log, pow as cpow

import numpy as np

cdef double NAN = float("nan")

cdef enum:
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

cdef double SNAP = 1e-9


cdef inline Py_ssize_t _bisect_left(const double[::1] xs, double q):
    cdef Py_ssize_t lo = 0, hi = xs.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if xs[mid] < q:
            lo = mid + 1
        else:
            hi = mid
    return lo


@cython.boundscheck(False)
@cython.wraparound(False)
cdef double _interp1(double q, int mode, int extrapolate,
                     const double[::1] xs, const double[::1] ys,
                     const double[::1] lxs, const double[::1] lys,
                     long* n_extrap):
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t j
    cdef double w
    if mode == 1 and not (q > 0):
        return NAN
    if q < xs[0] or q > xs[n - 1]:
        if extrapolate:
            n_extrap[0] += 1
        else:
            return NAN
    j = _bisect_left(xs, q) - 1
    if j < 0:
        j = 0
    if j > n - 2:
        j = n - 2
    if mode == 1:
        w = (log(q) - lxs[j]) / (lxs[j + 1] - lxs[j])
        return exp((1.0 - w) * lys[j] + w * lys[j + 1])
    w = (q - xs[j]) / (xs[j + 1] - xs[j])
    return (1.0 - w) * ys[j] + w * ys[j + 1]


@cython.boundscheck(False)
@cython.wraparound(False)
cdef double _deriv1(double q, int mode,
                    const double[::1] xs, const double[::1] ys,
                    const double[::1] lxs, const double[::1] lys):
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t k, near, alt, j1, j2
    cdef double s, fhat
    cdef long dummy = 0
    if q < xs[0] or q > xs[n - 1]:
        return NAN
    k = _bisect_left(xs, q)
    near = k if k <= n - 1 else n - 1
    alt = k - 1 if k - 1 >= 0 else 0
    if fabs(q - xs[alt]) < fabs(q - xs[near]):
        near = alt
    if fabs(q - xs[near]) <= SNAP * (fabs(xs[near]) + fabs(q)):
        j1 = near - 1
        j2 = near + 1
        if j1 < 0 or j2 > n - 1:
            return NAN
    else:
        j1 = k - 1
        if j1 < 0:
            j1 = 0
        if j1 > n - 2:
            j1 = n - 2
        j2 = j1 + 1
    if mode == 1:
        s = (lys[j2] - lys[j1]) / (lxs[j2] - lxs[j1])
        fhat = _interp1(q, 1, 1, xs, ys, lxs, lys, &dummy)
        return s * fhat / q
    return (ys[j2] - ys[j1]) / (xs[j2] - xs[j1])


def grid_interp(const double[::1] q, int mode, int extrapolate,
                const double[::1] xs, const double[::1] ys,
                const double[::1] lxs, const double[::1] lys):
    cdef Py_ssize_t i, n = q.shape[0]
    cdef long n_extrap = 0
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = _interp1(q[i], mode, extrapolate, xs, ys, lxs, lys, &n_extrap)
    return out_arr, int(n_extrap)


def grid_derivative(const double[::1] q, int mode,
                    const double[::1] xs, const double[::1] ys,
                    const double[::1] lxs, const double[::1] lys):
    cdef Py_ssize_t i, n = q.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = _deriv1(q[i], mode, xs, ys, lxs, lys)
    return out_arr


@cython.boundscheck(False)
@cython.wraparound(False)
cdef long _core(const int[::1] codes, const long long[::1] iargs, const double[::1] consts,
                double[:, ::1] stack,
                const double[::1] xv, const double[::1] yv, const double[::1] zv,
                int fkind, int fmode, int fextrap,
                const double[::1] xs, const double[::1] ys,
                const double[::1] lxs, const double[::1] lys,
                const double[::1] ixs, const double[::1] iys,
                const double[::1] lixs, const double[::1] liys,
                const int[::1] ccodes, const long long[::1] ciargs,
                const double[::1] cconsts, double[:, ::1] cstack,
                const int[::1] dcodes, const long long[::1] diargs,
                const double[::1] dconsts, double[:, ::1] dstack):
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t i, t, sp = 0
    cdef int op
    cdef long long ia
    cdef long n_extrap = 0
    cdef double v
    for i in range(codes.shape[0]):
        op = codes[i]
        ia = iargs[i]
        if op == OP_CONST:
            v = consts[ia]
            for t in range(n):
                stack[sp, t] = v
            sp += 1
        elif op == OP_VAR:
            if ia == 0:
                for t in range(n):
                    stack[sp, t] = xv[t]
            elif ia == 1:
                for t in range(n):
                    stack[sp, t] = yv[t]
            else:
                for t in range(n):
                    stack[sp, t] = zv[t]
            sp += 1
        elif op == OP_ADD:
            sp -= 1
            for t in range(n):
                stack[sp - 1, t] += stack[sp, t]
        elif op == OP_SUB:
            sp -= 1
            for t in range(n):
                stack[sp - 1, t] -= stack[sp, t]
        elif op == OP_MUL:
            sp -= 1
            for t in range(n):
                stack[sp - 1, t] *= stack[sp, t]
        elif op == OP_DIV:
            sp -= 1
            for t in range(n):
                stack[sp - 1, t] /= stack[sp, t]
        elif op == OP_NEG:
            for t in range(n):
                stack[sp - 1, t] = -stack[sp - 1, t]
        elif op == OP_POW:
            for t in range(n):
                stack[sp - 1, t] = cpow(stack[sp - 1, t], <double> ia)
        elif op == OP_LN:
            for t in range(n):
                v = stack[sp - 1, t]
                stack[sp - 1, t] = log(v) if v > 0 else NAN
        elif op == OP_EXP:
            for t in range(n):
                stack[sp - 1, t] = exp(stack[sp - 1, t])
        elif op == OP_FAPP:
            if fkind == 1:
                for t in range(n):
                    stack[sp - 1, t] = _interp1(stack[sp - 1, t], fmode, fextrap,
                                                xs, ys, lxs, lys, &n_extrap)
            elif fkind == 3:
                _core(ccodes, ciargs, cconsts, cstack,
                      stack[sp - 1], stack[sp - 1], stack[sp - 1],
                      0, 1, 1, xs, ys, lxs, lys, ixs, iys, lixs, liys,
                      ccodes, ciargs, cconsts, cstack,
                      ccodes, ciargs, cconsts, cstack)
                for t in range(n):
                    stack[sp - 1, t] = cstack[0, t]
            else:
                for t in range(n):
                    stack[sp - 1, t] = NAN
        elif op == OP_FPRIME:
            if fkind == 1:
                for t in range(n):
                    stack[sp - 1, t] = _deriv1(stack[sp - 1, t], fmode, xs, ys, lxs, lys)
            elif fkind == 3 and dcodes.shape[0] > 0:
                _core(dcodes, diargs, dconsts, dstack,
                      stack[sp - 1], stack[sp - 1], stack[sp - 1],
                      0, 1, 1, xs, ys, lxs, lys, ixs, iys, lixs, liys,
                      dcodes, diargs, dconsts, dstack,
                      dcodes, diargs, dconsts, dstack)
                for t in range(n):
                    stack[sp - 1, t] = dstack[0, t]
            else:
                for t in range(n):
                    stack[sp - 1, t] = NAN
        elif op == OP_FINV:
            if fkind == 1 and ixs.shape[0] > 0:
                for t in range(n):
                    stack[sp - 1, t] = _interp1(stack[sp - 1, t], fmode, fextrap,
                                                ixs, iys, lixs, liys, &n_extrap)
            else:
                for t in range(n):
                    stack[sp - 1, t] = NAN
    return n_extrap


def eval_tape(const int[::1] codes, const long long[::1] iargs, const double[::1] consts, int max_stack,
              const double[::1] xv, const double[::1] yv, const double[::1] zv,
              int fkind, int fmode, int fextrap,
              const double[::1] xs, const double[::1] ys, const double[::1] lxs, const double[::1] lys,
              const double[::1] ixs, const double[::1] iys, const double[::1] lixs, const double[::1] liys,
              const int[::1] ccodes, const long long[::1] ciargs, const double[::1] cconsts, int cmax,
              const int[::1] dcodes, const long long[::1] diargs, const double[::1] dconsts, int dmax):
    cdef Py_ssize_t n = xv.shape[0]
    stack_arr = np.empty((max(max_stack, 1), max(n, 1)), dtype=np.float64)
    cstack_arr = np.empty((max(cmax, 1), max(n, 1)), dtype=np.float64)
    dstack_arr = np.empty((max(dmax, 1), max(n, 1)), dtype=np.float64)
    cdef double[:, ::1] stack = stack_arr
    cdef double[:, ::1] cstack = cstack_arr
    cdef double[:, ::1] dstack = dstack_arr
    cdef long n_extrap = _core(codes, iargs, consts, stack, xv, yv, zv,
                               fkind, fmode, fextrap,
                               xs, ys, lxs, lys, ixs, iys, lixs, liys,
                               ccodes, ciargs, cconsts, cstack,
                               dcodes, diargs, dconsts, dstack)
    return stack_arr[0, :n].copy(), int(n_extrap)
