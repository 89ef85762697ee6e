"""Numeric kernels with a compiled fast path and a pure numpy fallback.

The compiled extension (Cython) is used when importable; set
``FESQUEEZE_KERNELS=pure`` to force the fallback or ``=native`` to require
the extension.  Both backends implement the same operations over the same
instruction tapes, so results agree to the last few ulps.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..tape import Tape

_EMPTY = np.empty(0, dtype=np.float64)
_EMPTY_I32 = np.empty(0, dtype=np.int32)
_EMPTY_I64 = np.empty(0, dtype=np.int64)

MODE_LOGLOG = 1
MODE_LINEAR = 2

FKIND_NONE = 0
FKIND_GRID = 1
FKIND_CANDIDATE = 3


@dataclass
class FSpec:
    """How the kernels should interpret f (and f', f^{-1}) inside a tape."""

    kind: int = FKIND_NONE
    mode: int = MODE_LOGLOG
    extrapolate: bool = True
    xs: np.ndarray = field(default_factory=lambda: _EMPTY)
    ys: np.ndarray = field(default_factory=lambda: _EMPTY)
    lxs: np.ndarray = field(default_factory=lambda: _EMPTY)
    lys: np.ndarray = field(default_factory=lambda: _EMPTY)
    ixs: np.ndarray = field(default_factory=lambda: _EMPTY)
    iys: np.ndarray = field(default_factory=lambda: _EMPTY)
    lixs: np.ndarray = field(default_factory=lambda: _EMPTY)
    liys: np.ndarray = field(default_factory=lambda: _EMPTY)
    ctape: Tape | None = None
    dtape: Tape | None = None


def grid_fspec(xs, ys, mode, extrapolate=True, with_inverse=False) -> FSpec:
    """Build an FSpec for a grid interpolant; precomputes log arrays."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if mode == MODE_LOGLOG:
        lxs = np.log(xs)
        lys = np.log(ys)
    else:
        lxs = _EMPTY
        lys = _EMPTY
    spec = FSpec(kind=FKIND_GRID, mode=mode, extrapolate=extrapolate,
                 xs=xs, ys=ys, lxs=lxs, lys=lys)
    if with_inverse:
        order = np.argsort(ys, kind="stable")
        ixs = np.ascontiguousarray(ys[order])
        iys = np.ascontiguousarray(xs[order])
        spec.ixs = ixs
        spec.iys = iys
        if mode == MODE_LOGLOG:
            spec.lixs = np.log(ixs)
            spec.liys = np.log(iys)
    return spec


def candidate_fspec(ctape: Tape, dtape: Tape | None = None) -> FSpec:
    return FSpec(kind=FKIND_CANDIDATE, ctape=ctape, dtape=dtape)


def _select_backend():
    choice = os.environ.get("FESQUEEZE_KERNELS", "auto").lower()
    if choice not in ("auto", "native", "pure"):
        raise ValueError(f"FESQUEEZE_KERNELS must be auto/native/pure, got {choice!r}")
    if choice in ("auto", "native"):
        try:
            from . import _native

            return _native, "native"
        except ImportError:
            if choice == "native":
                raise
    from . import pure

    return pure, "pure"


_impl, BACKEND = _select_backend()


def _tape_arrays(tape: Tape | None):
    if tape is None:
        return _EMPTY_I32, _EMPTY_I64, _EMPTY, 0
    return tape.codes, tape.iargs, tape.consts, tape.max_stack


def eval_tape(tape: Tape, xv, yv=None, zv=None, fspec: FSpec | None = None):
    """Evaluate a tape over arrays of bindings; returns (values, n_extrapolated).

    Out-of-domain results appear as NaN/inf in the output; callers decide
    whether that is an error.
    """
    xv = np.ascontiguousarray(xv, dtype=np.float64)
    yv = xv if yv is None else np.ascontiguousarray(yv, dtype=np.float64)
    zv = xv if zv is None else np.ascontiguousarray(zv, dtype=np.float64)
    spec = fspec or FSpec()
    ccodes, ciargs, cconsts, cmax = _tape_arrays(spec.ctape)
    dcodes, diargs, dconsts, dmax = _tape_arrays(spec.dtape)
    return _impl.eval_tape(
        tape.codes, tape.iargs, tape.consts, tape.max_stack,
        xv, yv, zv,
        spec.kind, spec.mode, int(spec.extrapolate),
        spec.xs, spec.ys, spec.lxs, spec.lys,
        spec.ixs, spec.iys, spec.lixs, spec.liys,
        ccodes, ciargs, cconsts, cmax,
        dcodes, diargs, dconsts, dmax,
    )


def grid_interp(q, spec: FSpec):
    """Interpolate a grid FSpec at query points; returns (values, n_extrapolated)."""
    q = np.ascontiguousarray(q, dtype=np.float64)
    return _impl.grid_interp(q, spec.mode, int(spec.extrapolate),
                             spec.xs, spec.ys, spec.lxs, spec.lys)


def grid_inverse(q, spec: FSpec):
    if spec.ixs.shape[0] == 0:
        raise ValueError("FSpec was built without inverse arrays")
    q = np.ascontiguousarray(q, dtype=np.float64)
    return _impl.grid_interp(q, spec.mode, int(spec.extrapolate),
                             spec.ixs, spec.iys, spec.lixs, spec.liys)


def grid_derivative(q, spec: FSpec):
    """Two-neighbor finite-difference derivative; NaN at or beyond boundaries."""
    q = np.ascontiguousarray(q, dtype=np.float64)
    return _impl.grid_derivative(q, spec.mode, spec.xs, spec.ys, spec.lxs, spec.lys)
