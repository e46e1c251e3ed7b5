"""One-step maps and the path-level driver.

The Runge-Kutta scheme is the improved Euler (Heun) step with the Wiener
increment shifted by a random sign in each stage::

    K1 = h a(t_k, X_k)       + (dW_k - S_k sqrt(h)) b(t_k, X_k)
    K2 = h a(t_k+h, X_k+K1)  + (dW_k + S_k sqrt(h)) b(t_k+h, X_k+K1)
    X_{k+1} = X_k + (K1 + K2)/2

with S_k = +-1 (equal odds, independent of W) for Itô problems and S_k = 0
for Stratonovich problems.  Euler-Maruyama and Milstein serve as baselines.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import CapabilityError, EvaluationError, InterpretationError
from .problems import SdeProblem
from .wiener import TimeGrid, WienerPath


class SchemeId(str, enum.Enum):
    RK_PAPER = "rk"
    EULER_MARUYAMA = "em"
    MILSTEIN = "milstein"

    @classmethod
    def parse(cls, value) -> "SchemeId":
        if isinstance(value, cls):
            return value
        aliases = {"rkpaper": "rk", "heun": "rk", "euler": "em", "euler_maruyama": "em"}
        key = str(value).strip().lower().replace("-", "_")
        return cls(aliases.get(key, key))


class SignMode(str, enum.Enum):
    RADEMACHER = "rademacher"
    ZERO = "zero"


@dataclass
class SignSequence:
    """Source of the per-step signs S_k.

    Rademacher mode draws iid +-1 from its own stream, which must not be the
    stream that produced the Wiener increments.
    """

    mode: SignMode
    stream: Optional[np.random.Generator] = None

    def __post_init__(self):
        self.mode = SignMode(self.mode)
        if self.mode is SignMode.RADEMACHER and self.stream is None:
            raise ValueError("Rademacher signs need a random stream")

    @classmethod
    def rademacher(cls, stream: np.random.Generator) -> "SignSequence":
        return cls(SignMode.RADEMACHER, stream)

    @classmethod
    def zero(cls) -> "SignSequence":
        return cls(SignMode.ZERO)

    def draw(self, n: int) -> np.ndarray:
        if self.mode is SignMode.ZERO:
            return np.zeros(n)
        return 2.0 * self.stream.integers(0, 2, size=n) - 1.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray  # (n+1, dim)
    clamp_count: int = 0

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _finite(t, x, *values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise EvaluationError(t, np.array(x, copy=True))


def rk_step(problem: SdeProblem, t_k: float, x_k, h: float, dW: float, s: float) -> np.ndarray:
    if not h > 0:
        raise ValueError("step must be positive")
    if s not in (-1, 0, 1):
        raise ValueError(f"sign must be -1, 0 or +1, got {s!r}")
    x_k = np.asarray(x_k, dtype=float)
    a, b = problem.drift, problem.volatility
    sq = math.sqrt(h)
    t1 = t_k + h
    k1 = h * a(t_k, x_k) + (dW - s * sq) * b(t_k, x_k)
    x_mid = x_k + k1
    k2 = h * a(t1, x_mid) + (dW + s * sq) * b(t1, x_mid)
    x_next = x_k + 0.5 * (k1 + k2)
    _finite(t_k, x_k, k1, k2, x_next)
    return x_next


def euler_maruyama_step(problem: SdeProblem, t_k: float, x_k, h: float, dW: float) -> np.ndarray:
    if not h > 0:
        raise ValueError("step must be positive")
    x_k = np.asarray(x_k, dtype=float)
    x_next = x_k + h * problem.drift(t_k, x_k) + dW * problem.volatility(t_k, x_k)
    _finite(t_k, x_k, x_next)
    return x_next


def milstein_step(problem: SdeProblem, t_k: float, x_k, h: float, dW: float) -> np.ndarray:
    """Euler-Maruyama plus b'b (dW^2 - h)/2; scalar problems only."""
    if problem.dim != 1:
        raise CapabilityError("Milstein is implemented for dim-1 problems only")
    if not h > 0:
        raise ValueError("step must be positive")
    x_k = np.asarray(x_k, dtype=float)
    bx = problem.volatility(t_k, x_k)
    if problem.elementwise and problem.volatility_jacobian is None:
        corr = problem.scalar_derivative()(t_k, x_k) * bx
    else:
        corr = problem.bprime_b(t_k, x_k)
    x_next = x_k + h * problem.drift(t_k, x_k) + dW * bx + 0.5 * corr * (dW * dW - h)
    _finite(t_k, x_k, x_next)
    return x_next


def check_compatible(problem: SdeProblem, scheme: SchemeId, signs: SignSequence) -> None:
    """Raise or warn when scheme, signs and interpretation do not match."""
    if scheme is SchemeId.MILSTEIN and problem.dim != 1:
        raise CapabilityError("Milstein is implemented for dim-1 problems only")
    if not problem.is_ito:
        if scheme is not SchemeId.RK_PAPER:
            raise InterpretationError(
                f"{scheme.value} integrates Itô problems only; convert with stratonovich_to_ito")
        if signs.mode is not SignMode.ZERO:
            raise InterpretationError("Stratonovich problems need zero signs with the rk scheme")
    elif scheme is SchemeId.RK_PAPER and signs.mode is SignMode.ZERO:
        warnings.warn(f"{problem.name}: zero signs integrate the Stratonovich reading "
                      "of an Itô problem", stacklevel=3)


def integrate(problem: SdeProblem, path: WienerPath, scheme=SchemeId.RK_PAPER,
              signs: SignSequence | None = None) -> Trajectory:
    """Apply the chosen one-step map over every increment of ``path``.

    ``signs`` may be omitted except for the rk scheme on an Itô problem.
    """
    scheme = SchemeId.parse(scheme)
    if signs is None:
        if scheme is SchemeId.RK_PAPER and problem.is_ito:
            raise ValueError("the rk scheme on an Itô problem needs a Rademacher SignSequence")
        signs = SignSequence.zero()
    check_compatible(problem, scheme, signs)
    grid = path.grid
    S = signs.draw(grid.n)[None, :] if scheme is SchemeId.RK_PAPER else None
    res = kernels.advance(scheme.value, problem, path.increments[None, :], S,
                          t0=grid.t0, h=grid.h, record=True)
    if res.aborted[0]:
        k = int(res.abort_step[0])
        raise EvaluationError(grid.time(k), res.states[0, k].copy())
    return Trajectory(grid, res.states[0], int(res.clamps[0]))
