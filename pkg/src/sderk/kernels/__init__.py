"""Batch integration kernels with a compiled and a pure-numpy backend.

The backend is chosen per call from ``SDERK_BACKEND``:

``numba`` (default when numba imports)
    compiled scalar loops; used for elementwise problems only.
``numpy``
    vectorised over realizations; handles every problem.

Non-elementwise problems, and problems whose functions numba cannot compile,
always run on numpy.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from . import _numpy

log = logging.getLogger(__name__)

try:
    from . import _numba
except ImportError:  # pragma: no cover - numba is optional at runtime
    _numba = None

ENV_FLAG = "SDERK_BACKEND"
SCHEMES = ("rk", "em", "milstein")
_failed_jit: set = set()


@dataclass
class BatchResult:
    final: np.ndarray          # (M, dim); NaN rows for aborted realizations
    states: np.ndarray | None  # (M, n+1, dim) when recorded
    clamps: np.ndarray         # (M,) volatility evaluations outside the domain
    abort_step: np.ndarray     # (M,) first failing step, -1 if none
    backend: str

    @property
    def aborted(self) -> np.ndarray:
        return self.abort_step >= 0


def requested_backend() -> str:
    name = os.environ.get(ENV_FLAG, "").strip().lower()
    if name in ("", "auto"):
        return "numba" if _numba is not None else "numpy"
    if name not in ("numba", "numpy"):
        raise ValueError(f"{ENV_FLAG} must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and _numba is None:
        log.warning("numba is not importable; using the numpy backend")
        return "numpy"
    return name


def backend_for(problem, scheme: str) -> str:
    if requested_backend() == "numba" and problem.elementwise and (problem.name, scheme, id(problem)) not in _failed_jit:
        return "numba"
    return "numpy"


def advance(scheme: str, problem, dW, S=None, *, t0: float, h: float, record: bool = False,
            backend: str | None = None) -> BatchResult:
    """Integrate one realization per row of ``dW`` from ``problem.x0`` at ``t0``.

    ``S`` holds the sign values for the ``rk`` scheme (same shape as ``dW``).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    M, n = dW.shape
    if scheme == "rk":
        S = np.zeros_like(dW) if S is None else np.broadcast_to(np.asarray(S, dtype=float), dW.shape)
    x0 = np.array(problem.x0, dtype=float)
    dim = x0.size
    states = np.empty((M, n + 1, dim)) if record else np.empty((M, 1, dim))
    final = np.empty((M, dim))
    clamps = np.zeros(M, dtype=np.int64)
    abort_step = np.full(M, -1, dtype=np.int64)
    args = (scheme, problem, x0, float(t0), float(h), dW, S, record, states, final, clamps, abort_step)
    chosen = backend or backend_for(problem, scheme)
    if chosen == "numba":
        if _numba is None or not problem.elementwise:
            raise ValueError("numba backend needs numba and an elementwise problem")
        try:
            _numba.advance(*args)
        except Exception as exc:  # numba typing/lowering failures
            if not _is_numba_error(exc):
                raise
            log.warning("could not compile %s for %s (%s); falling back to numpy",
                        problem.name, scheme, type(exc).__name__)
            _failed_jit.add((problem.name, scheme, id(problem)))
            chosen = "numpy"
            clamps[:] = 0
            abort_step[:] = -1
            _numpy.advance(*args)
    else:
        _numpy.advance(*args)
    return BatchResult(final, states if record else None, clamps, abort_step, chosen)


def _is_numba_error(exc: Exception) -> bool:
    from numba.core.errors import NumbaError

    return isinstance(exc, NumbaError)
