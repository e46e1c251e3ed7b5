"""Pure-numpy integrators: one vectorised update per step across realizations."""
from __future__ import annotations

import math

import numpy as np


def _no_clamps(t, x):
    return None


def _make_counter(problem):
    dom = problem.in_domain
    if dom is None:
        return _no_clamps

    def count(t, x):
        return np.count_nonzero(~np.broadcast_to(dom(t, x), x.shape), axis=-1)

    return count


def advance(scheme, problem, x0, t0, h, dW, S, record, states, final, clamps, abort_step):
    """Integrate ``M`` realizations; same contract as the compiled kernels.

    ``dW`` and ``S`` have shape (M, n).  Rows that hit a non-finite stage get
    their step index written to ``abort_step`` and carry NaN afterwards.
    """
    a, b = problem.drift, problem.volatility
    db = problem.scalar_derivative() if scheme == "milstein" and problem.elementwise else None
    count = _make_counter(problem)
    M, n = dW.shape
    dim = x0.size
    # step-major copies keep every per-step operand contiguous whatever M is
    dWt = np.ascontiguousarray(dW.T)
    St = np.ascontiguousarray(S.T) if S is not None else None
    x = np.empty((M, dim))
    x[:] = x0
    alive = np.ones(M, dtype=bool)
    sq = math.sqrt(h)
    if record:
        states[:, 0, :] = x
    with np.errstate(all="ignore"):
        for k in range(n):
            t = t0 + k * h
            d = dWt[k][:, None]
            if scheme == "rk":
                t1 = t0 + (k + 1) * h
                s = St[k][:, None]
                c0 = count(t, x)
                k1 = h * a(t, x) + (d - s * sq) * b(t, x)
                xs = x + k1
                c1 = count(t1, xs)
                k2 = h * a(t1, xs) + (d + s * sq) * b(t1, xs)
                xn = x + 0.5 * (k1 + k2)
                ok = np.isfinite(k1).all(-1) & np.isfinite(k2).all(-1) & np.isfinite(xn).all(-1)
                if c0 is not None:
                    clamps[alive] += (c0 + c1)[alive]
            elif scheme == "em":
                c0 = count(t, x)
                xn = x + h * a(t, x) + d * b(t, x)
                ok = np.isfinite(xn).all(-1)
                if c0 is not None:
                    clamps[alive] += c0[alive]
            elif scheme == "milstein":
                c0 = count(t, x)
                bx = b(t, x)
                if db is not None:
                    corr = db(t, x) * bx
                else:
                    corr = problem.bprime_b(t, x)
                xn = x + h * a(t, x) + d * bx + 0.5 * corr * (d * d - h)
                ok = np.isfinite(xn).all(-1)
                if c0 is not None:
                    clamps[alive] += c0[alive]
            else:
                raise ValueError(f"unknown scheme {scheme!r}")
            newly = alive & ~ok
            if newly.any():
                abort_step[newly] = k
                alive &= ok
                xn[~alive] = np.nan
            x = xn
            if record:
                states[:, k + 1, :] = x
    final[:] = x
