"""Compiled scalar integrators for elementwise problems.

Each kernel walks realizations, then steps, then state components, calling the
problem's functions on plain floats.  Arithmetic follows the numpy backend
operation for operation (no fastmath), so both give the same bits wherever
the problem functions themselves agree.
"""
from __future__ import annotations

import math
import types

import numba
import numpy as np
from numba.core.registry import CPUDispatcher

_cache: dict = {}


def jit_ready(fn):
    """Compiled copy of ``fn``; closure cells holding functions are compiled too."""
    if isinstance(fn, CPUDispatcher):
        return fn
    hit = _cache.get(fn)
    if hit is not None:
        return hit
    source = fn
    if fn.__closure__:
        cells = []
        for cell in fn.__closure__:
            value = cell.cell_contents
            if isinstance(value, types.FunctionType):
                value = jit_ready(value)
            cells.append(types.CellType(value))
        fn = types.FunctionType(fn.__code__, fn.__globals__, fn.__name__,
                                fn.__defaults__, tuple(cells))
    jitted = numba.njit(fn)
    _cache[source] = jitted
    return jitted


@numba.njit
def always_in_domain(t, x):
    return True


@numba.njit(nogil=True)
def rk_kernel(a, b, dom, x0, t0, h, dW, S, record, states, final, clamps, abort_step):
    M, n = dW.shape
    dim = x0.size
    sq = math.sqrt(h)
    x = np.empty(dim)
    xn = np.empty(dim)
    for m in range(M):
        x[:] = x0
        if record:
            states[m, 0, :] = x
        aborted = False
        for k in range(n):
            t = t0 + k * h
            t1 = t0 + (k + 1) * h
            d = dW[m, k]
            s = S[m, k]
            ok = True
            for i in range(dim):
                xi = x[i]
                if not dom(t, xi):
                    clamps[m] += 1
                k1 = h * a(t, xi) + (d - s * sq) * b(t, xi)
                xs = xi + k1
                if not dom(t1, xs):
                    clamps[m] += 1
                k2 = h * a(t1, xs) + (d + s * sq) * b(t1, xs)
                v = xi + 0.5 * (k1 + k2)
                if not (math.isfinite(k1) and math.isfinite(k2) and math.isfinite(v)):
                    ok = False
                xn[i] = v
            if not ok:
                abort_step[m] = k
                aborted = True
                break
            x[:] = xn
            if record:
                states[m, k + 1, :] = x
        if aborted:
            final[m, :] = np.nan
            if record:
                states[m, abort_step[m] + 1:, :] = np.nan
        else:
            final[m, :] = x


@numba.njit(nogil=True)
def em_kernel(a, b, dom, x0, t0, h, dW, record, states, final, clamps, abort_step):
    M, n = dW.shape
    dim = x0.size
    x = np.empty(dim)
    xn = np.empty(dim)
    for m in range(M):
        x[:] = x0
        if record:
            states[m, 0, :] = x
        aborted = False
        for k in range(n):
            t = t0 + k * h
            d = dW[m, k]
            ok = True
            for i in range(dim):
                xi = x[i]
                if not dom(t, xi):
                    clamps[m] += 1
                v = xi + h * a(t, xi) + d * b(t, xi)
                if not math.isfinite(v):
                    ok = False
                xn[i] = v
            if not ok:
                abort_step[m] = k
                aborted = True
                break
            x[:] = xn
            if record:
                states[m, k + 1, :] = x
        if aborted:
            final[m, :] = np.nan
            if record:
                states[m, abort_step[m] + 1:, :] = np.nan
        else:
            final[m, :] = x


@numba.njit(nogil=True)
def milstein_kernel(a, b, db, dom, x0, t0, h, dW, record, states, final, clamps, abort_step):
    M, n = dW.shape
    dim = x0.size
    x = np.empty(dim)
    xn = np.empty(dim)
    for m in range(M):
        x[:] = x0
        if record:
            states[m, 0, :] = x
        aborted = False
        for k in range(n):
            t = t0 + k * h
            d = dW[m, k]
            ok = True
            for i in range(dim):
                xi = x[i]
                if not dom(t, xi):
                    clamps[m] += 1
                bx = b(t, xi)
                corr = db(t, xi) * bx
                v = xi + h * a(t, xi) + d * bx + 0.5 * corr * (d * d - h)
                if not math.isfinite(v):
                    ok = False
                xn[i] = v
            if not ok:
                abort_step[m] = k
                aborted = True
                break
            x[:] = xn
            if record:
                states[m, k + 1, :] = x
        if aborted:
            final[m, :] = np.nan
            if record:
                states[m, abort_step[m] + 1:, :] = np.nan
        else:
            final[m, :] = x


def advance(scheme, problem, x0, t0, h, dW, S, record, states, final, clamps, abort_step):
    a = jit_ready(problem.drift)
    b = jit_ready(problem.volatility)
    dom = always_in_domain if problem.in_domain is None else jit_ready(problem.in_domain)
    dW = np.ascontiguousarray(dW)
    if scheme == "rk":
        rk_kernel(a, b, dom, x0, t0, h, dW, np.ascontiguousarray(S), record,
                  states, final, clamps, abort_step)
    elif scheme == "em":
        em_kernel(a, b, dom, x0, t0, h, dW, record, states, final, clamps, abort_step)
    elif scheme == "milstein":
        db = jit_ready(problem.scalar_derivative())
        milstein_kernel(a, b, db, dom, x0, t0, h, dW, record, states, final, clamps, abort_step)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
