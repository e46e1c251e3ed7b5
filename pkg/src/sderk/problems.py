"""SDE problem definitions and the catalogue of analytically solvable cases.

Drift, volatility and their derivatives take ``(t, x)`` where the last axis of
``x`` is the state dimension, and return arrays shaped like ``x``.  Problems
flagged ``elementwise`` act component by component (component i of the drift
depends on ``t`` and ``x[..., i]`` only) and are written with numpy ufuncs, so
they also accept plain floats.  That is what lets the compiled kernels run
them one scalar at a time.

Exact solutions take ``(t, w)`` and return an array of shape
``np.shape(w) + (dim,)``.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError, InterpretationError, SdeError

EPS = np.finfo(float).eps
# Jacobian fallback: central differences with step cbrt(eps) * max(1, |x|)
FD_STEP = EPS ** (1.0 / 3.0)
# ito_residual stencils: 5-point first and second derivatives
RESIDUAL_STEP_D1 = EPS ** (1.0 / 5.0)
RESIDUAL_STEP_D2 = EPS ** (1.0 / 6.0)


class Interpretation(str, enum.Enum):
    ITO = "ito"
    STRATONOVICH = "stratonovich"


class Order(enum.IntEnum):
    FIRST = 1
    SECOND = 2


class UnknownProblemError(SdeError, KeyError):
    pass


@dataclass(frozen=True, eq=False)
class SdeProblem:
    """dX = a(t, X) dt + b(t, X) dW with a single scalar Wiener channel.

    ``volatility_jacobian`` returns the full ``dim x dim`` matrix ∂b_i/∂x_j.
    For elementwise problems ``volatility_derivative`` may give the diagonal
    directly.  ``in_domain`` flags states where the volatility is clamped;
    the integrators count those evaluations.
    """

    dim: int
    drift: Callable
    volatility: Callable
    x0: np.ndarray
    interpretation: Interpretation = Interpretation.ITO
    volatility_jacobian: Optional[Callable] = None
    exact_solution: Optional[Callable] = None
    volatility_derivative: Optional[Callable] = None
    in_domain: Optional[Callable] = None
    elementwise: bool = False
    t0: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        if self.dim < 1 or x0.size != self.dim:
            raise ValueError(f"x0 has {x0.size} components, dim is {self.dim}")
        x0.flags.writeable = False
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "interpretation", Interpretation(self.interpretation))

    @property
    def is_ito(self) -> bool:
        return self.interpretation is Interpretation.ITO

    def jacobian(self, t, x) -> np.ndarray:
        """∂b/∂x at ``x`` with shape ``x.shape + (dim,)``."""
        x = np.asarray(x, dtype=float)
        if self.volatility_jacobian is not None:
            return np.asarray(self.volatility_jacobian(t, x), dtype=float)
        if self.volatility_derivative is not None:
            d = np.asarray(self.volatility_derivative(t, x), dtype=float)
            return d[..., :, None] * np.eye(self.dim)
        return fd_jacobian(self.volatility, t, x)

    def bprime_b(self, t, x) -> np.ndarray:
        """The Itô-Stratonovich correction vector b'·b (before halving)."""
        x = np.asarray(x, dtype=float)
        b = np.asarray(self.volatility(t, x), dtype=float)
        if self.elementwise and self.volatility_jacobian is None:
            return self.scalar_derivative()(t, x) * b
        return np.einsum("...ij,...j->...i", self.jacobian(t, x), b)

    def scalar_derivative(self) -> Callable:
        """Elementwise ∂b_i/∂x_i for elementwise problems (analytic or FD)."""
        if not self.elementwise:
            raise CapabilityError(f"{self.name}: volatility is not elementwise")
        if self.volatility_derivative is not None:
            return self.volatility_derivative
        return self._fd_derivative

    @functools.cached_property
    def _fd_derivative(self) -> Callable:
        return fd_derivative(self.volatility)

    def solution(self, t, w) -> np.ndarray:
        if self.exact_solution is None:
            raise CapabilityError(f"{self.name}: no closed-form solution")
        return np.asarray(self.exact_solution(t, w), dtype=float)


@dataclass(frozen=True)
class CatalogueEntry:
    id: str
    problem: SdeProblem
    expected_order: Order
    sde: str = ""
    solution: str = ""


def fd_derivative(volatility: Callable) -> Callable:
    """Central-difference ∂b_i/∂x_i for an elementwise volatility."""
    step = FD_STEP

    def derivative(t, x):
        d = step * np.maximum(1.0, np.abs(x))
        up = x + d
        down = x - d
        return (volatility(t, up) - volatility(t, down)) / (up - down)

    return derivative


def fd_jacobian(volatility: Callable, t, x) -> np.ndarray:
    """Central-difference Jacobian, step ``cbrt(eps) * max(1, |x_j|)``."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    jac = np.empty(x.shape + (dim,))
    for j in range(dim):
        d = FD_STEP * max(1.0, float(np.max(np.abs(x[..., j]))))
        up = x.copy()
        down = x.copy()
        up[..., j] += d
        down[..., j] -= d
        span = (up[..., j] - down[..., j])[..., None]
        jac[..., :, j] = (np.asarray(volatility(t, up)) - np.asarray(volatility(t, down))) / span
    return jac


def _column(f: Callable) -> Callable:
    """Lift a scalar solution f(t, w) to the (..., 1) state layout."""

    def solution(t, w):
        return np.asarray(f(t, w), dtype=float)[..., None]

    return solution


def _scalar(entry_id, drift, volatility, derivative, solution, x0, order, sde, text,
            in_domain=None) -> CatalogueEntry:
    problem = SdeProblem(
        dim=1,
        drift=drift,
        volatility=volatility,
        x0=[x0],
        volatility_derivative=derivative,
        exact_solution=_column(solution),
        in_domain=in_domain,
        elementwise=True,
        name=entry_id,
    )
    return CatalogueEntry(entry_id, problem, order, sde, text)


def _build_catalogue() -> tuple:
    entries = [
        _scalar(
            "autonomous",
            lambda t, x: 0.5 * x + np.sqrt(1.0 + x * x),
            lambda t, x: np.sqrt(1.0 + x * x),
            lambda t, x: x / np.sqrt(1.0 + x * x),
            lambda t, w: np.sinh(t + w),
            0.0, Order.FIRST,
            "dX = [X/2 + sqrt(1+X^2)] dt + sqrt(1+X^2) dW, X(0)=0",
            "X = sinh(t + W)",
        ),
        _scalar(
            "nonautonomous",
            lambda t, x: (x / (1.0 + t)
                          - 1.5 * x * (1.0 - x * x / ((1.0 + t) * (1.0 + t))) ** 2),
            lambda t, x: ((1.0 + t) * np.maximum(1.0 - x * x / ((1.0 + t) * (1.0 + t)), 0.0)
                          * np.sqrt(np.maximum(1.0 - x * x / ((1.0 + t) * (1.0 + t)), 0.0))),
            lambda t, x: (-3.0 * x / (1.0 + t)
                          * np.sqrt(np.maximum(1.0 - x * x / ((1.0 + t) * (1.0 + t)), 0.0))),
            lambda t, w: (1.0 + t) * w / np.sqrt(1.0 + w * w),
            0.0, Order.FIRST,
            "dX = [X/(1+t) - 3/2 X (1 - X^2/(1+t)^2)^2] dt"
            " + (1+t) (1 - X^2/(1+t)^2)^(3/2) dW, X(0)=0",
            "X = (1+t) W / sqrt(1 + W^2)",
            in_domain=lambda t, x: x * x <= (1.0 + t) * (1.0 + t),
        ),
        _scalar(
            "linear2nd",
            lambda t, x: 2.0 * x / (1.0 + t) + (1.0 + t) * (1.0 + t),
            lambda t, x: (1.0 + t) * (1.0 + t) + 0.0 * x,
            lambda t, x: 0.0 * x,
            lambda t, w: (1.0 + t) * (1.0 + t) * (1.0 + t + w),
            1.0, Order.SECOND,
            "dX = [2X/(1+t) + (1+t)^2] dt + (1+t)^2 dW, X(0)=1",
            "X = (1+t)^2 (1 + t + W)",
        ),
        _scalar(
            "ex1",
            lambda t, x: 0.5 * (x - t),
            lambda t, x: x - t - 2.0,
            lambda t, x: 1.0 + 0.0 * x,
            lambda t, w: 2.0 + t + np.exp(w),
            3.0, Order.FIRST,
            "dX = (X - t)/2 dt + (X - t - 2) dW, X(0)=3",
            "X = 2 + t + exp(W)",
        ),
        _scalar(
            "ex2",
            lambda t, x: 0.0 * x,
            lambda t, x: x,
            lambda t, x: 1.0 + 0.0 * x,
            lambda t, w: np.exp(w - 0.5 * t),
            1.0, Order.FIRST,
            "dX = X dW, X(0)=1",
            "X = exp(W - t/2)",
        ),
        _scalar(
            "ex3",
            lambda t, x: -x * (1.0 - x * x),
            lambda t, x: 1.0 - x * x,
            lambda t, x: -2.0 * x,
            lambda t, w: np.tanh(w),
            0.0, Order.FIRST,
            "dX = -X (1 - X^2) dt + (1 - X^2) dW, X(0)=0",
            "X = tanh(W)",
        ),
        _scalar(
            "ex4",
            lambda t, x: -x,
            lambda t, x: np.exp(-t) + 0.0 * x,
            lambda t, x: 0.0 * x,
            lambda t, w: np.exp(-t) * w,
            0.0, Order.SECOND,
            "dX = -X dt + exp(-t) dW, X(0)=0",
            "X = exp(-t) W",
        ),
        _scalar(
            "ex5",
            lambda t, x: -1.5 * x * (1.0 - x * x) ** 2,
            lambda t, x: np.maximum(1.0 - x * x, 0.0) * np.sqrt(np.maximum(1.0 - x * x, 0.0)),
            lambda t, x: -3.0 * x * np.sqrt(np.maximum(1.0 - x * x, 0.0)),
            lambda t, w: w / np.sqrt(1.0 + w * w),
            0.0, Order.FIRST,
            "dX = -3/2 X (1 - X^2)^2 dt + (1 - X^2)^(3/2) dW, X(0)=0",
            "X = W / sqrt(1 + W^2)",
            in_domain=lambda t, x: x * x <= 1.0,
        ),
    ]
    return tuple(entries)


def _build_extras() -> tuple:
    vec_x0 = np.array([0.0, 1.0])
    vec2 = SdeProblem(
        dim=2,
        drift=lambda t, x: -x,
        volatility=lambda t, x: np.exp(-t) + 0.0 * x,
        x0=vec_x0,
        volatility_derivative=lambda t, x: 0.0 * x,
        exact_solution=lambda t, w: np.exp(-t) * (vec_x0 + np.asarray(w, dtype=float)[..., None]),
        elementwise=True,
        name="vec2",
    )
    strat = SdeProblem(
        dim=1,
        drift=lambda t, x: 0.0 * x,
        volatility=lambda t, x: x,
        x0=[1.0],
        interpretation=Interpretation.STRATONOVICH,
        volatility_derivative=lambda t, x: 1.0 + 0.0 * x,
        exact_solution=_column(lambda t, w: np.exp(w)),
        elementwise=True,
        name="ex2_strat",
    )
    return (
        _scalar(
            "pure_wiener",
            lambda t, x: 0.0 * x,
            lambda t, x: 1.0 + 0.0 * x,
            lambda t, x: 0.0 * x,
            lambda t, w: 0.0 + w,
            0.0, Order.FIRST,
            "dX = dW, X(0)=0",
            "X = W",
        ),
        _scalar(
            "decay",
            lambda t, x: -x,
            lambda t, x: 0.0 * x,
            lambda t, x: 0.0 * x,
            lambda t, w: np.exp(-t) + 0.0 * np.asarray(w),
            1.0, Order.SECOND,
            "dX = -X dt, X(0)=1 (no noise)",
            "X = exp(-t)",
        ),
        CatalogueEntry("vec2", vec2, Order.SECOND,
                       "dX_i = -X_i dt + exp(-t) dW, X(0)=(0, 1)",
                       "X_i = exp(-t) (X_i(0) + W)"),
        CatalogueEntry("ex2_strat", strat, Order.FIRST,
                       "dX = X o dW (Stratonovich), X(0)=1", "X = exp(W)"),
    )


_CATALOGUE = _build_catalogue()
_EXTRAS = _build_extras()
_TWINS = {("ex2", Interpretation.STRATONOVICH): "ex2_strat",
          ("ex2_strat", Interpretation.ITO): "ex2"}


def catalogue() -> list:
    """The eight closed-form test problems of the convergence study."""
    return list(_CATALOGUE)


def extras() -> list:
    """Auxiliary problems: pure_wiener, decay, vec2 and ex2_strat."""
    return list(_EXTRAS)


def all_entries() -> list:
    return list(_CATALOGUE) + list(_EXTRAS)


def get_entry(entry_id: str) -> CatalogueEntry:
    for entry in all_entries():
        if entry.id == entry_id:
            return entry
    known = ", ".join(e.id for e in all_entries())
    raise UnknownProblemError(f"unknown problem {entry_id!r}; known: {known}")


def get_problem(entry_id: str) -> SdeProblem:
    return get_entry(entry_id).problem


def reinterpret(problem: SdeProblem, interpretation) -> SdeProblem:
    """Same coefficients read under the other calculus.

    The closed-form solution only carries over when the catalogue holds a
    twin entry for the new reading; otherwise it is dropped.
    """
    interpretation = Interpretation(interpretation)
    if interpretation is problem.interpretation:
        return problem
    twin = _TWINS.get((problem.name, interpretation))
    if twin is not None:
        return get_problem(twin)
    return replace(problem, interpretation=interpretation, exact_solution=None,
                   name=f"{problem.name}[{interpretation.value}]")


def stratonovich_to_ito(problem: SdeProblem) -> SdeProblem:
    """Itô problem with the same solutions: drift a + b'b/2, volatility b."""
    if problem.interpretation is not Interpretation.STRATONOVICH:
        raise InterpretationError(f"{problem.name} is already an Itô problem")
    a, b = problem.drift, problem.volatility
    if problem.elementwise and problem.volatility_jacobian is None:
        db = problem.scalar_derivative()

        def drift(t, x):
            return a(t, x) + 0.5 * db(t, x) * b(t, x)
    else:
        def drift(t, x):
            return np.asarray(a(t, x), dtype=float) + 0.5 * problem.bprime_b(t, x)

    return replace(problem, drift=drift, interpretation=Interpretation.ITO,
                   name=f"{problem.name}->ito")


def _d1(f, x, step):
    return (-f(x + 2 * step) + 8 * f(x + step) - 8 * f(x - step) + f(x - 2 * step)) / (12 * step)


def _d2(f, x, step):
    return (-f(x + 2 * step) + 16 * f(x + step) - 30 * f(x) + 16 * f(x - step)
            - f(x - 2 * step)) / (12 * step * step)


def ito_residual(problem: SdeProblem, t: float, w: float) -> tuple:
    """Check X = f(t, W) against Itô's formula.

    Returns ``(|f_t + f_ww/2 - a|, |f_w - b|)`` evaluated at ``(t, f(t, w))``,
    maximised over state components.  The partial derivatives of ``f`` use
    5-point central stencils with steps ``eps**(1/5)`` (first derivatives)
    and ``eps**(1/6)`` (second), each scaled by ``max(1, |argument|)``.
    """
    if problem.exact_solution is None:
        raise CapabilityError(f"{problem.name}: no closed-form solution to check")
    if not problem.is_ito:
        raise InterpretationError("Itô's formula applies to Itô problems")
    f = problem.exact_solution
    t, w = float(t), float(w)
    st = RESIDUAL_STEP_D1 * max(1.0, abs(t))
    sw = RESIDUAL_STEP_D1 * max(1.0, abs(w))
    sww = RESIDUAL_STEP_D2 * max(1.0, abs(w))
    f_t = _d1(lambda s: np.asarray(f(s, w), dtype=float), t, st)
    f_w = _d1(lambda v: np.asarray(f(t, v), dtype=float), w, sw)
    f_ww = _d2(lambda v: np.asarray(f(t, v), dtype=float), w, sww)
    x = np.asarray(f(t, w), dtype=float)
    drift_res = np.abs(f_t + 0.5 * f_ww - np.asarray(problem.drift(t, x)))
    vol_res = np.abs(f_w - np.asarray(problem.volatility(t, x)))
    return float(np.max(drift_res)), float(np.max(vol_res))


def residual_points(count: int = 100) -> np.ndarray:
    """Deterministic quasi-random (t, w) pairs in [0, 1] x [-2, 2] (Halton)."""
    from scipy.stats import qmc

    pts = qmc.Halton(d=2, scramble=False).random(count + 1)[1:]
    return np.column_stack([pts[:, 0], 4.0 * pts[:, 1] - 2.0])


def max_residuals(problem: SdeProblem, points=None) -> tuple:
    if points is None:
        points = residual_points()
    worst = [0.0, 0.0]
    for t, w in points:
        dr, vr = ito_residual(problem, t, w)
        worst = [max(worst[0], dr), max(worst[1], vr)]
    return tuple(worst)


__all__ = [
    "CatalogueEntry", "Interpretation", "Order", "SdeProblem", "UnknownProblemError",
    "all_entries", "catalogue", "extras", "fd_jacobian", "get_entry", "get_problem",
    "ito_residual", "max_residuals", "reinterpret", "residual_points",
    "stratonovich_to_ito",
]
