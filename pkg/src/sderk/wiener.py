"""Scalar Wiener paths on uniform grids.

A path is stored as its increments together with the cumulative values at the
grid nodes.  Fine paths get their node values from a sequential (left to right)
cumulative sum; coarsened paths subsample the parent's node values, so the
total displacement survives any number of coarsenings bit for bit.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import streams
from .errors import AggregationError, GridError, IndexDomainError


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t_end: float
    n: int

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise GridError(f"step count must be a positive integer, got {self.n!r}")
        if not (math.isfinite(self.t0) and math.isfinite(self.t_end)):
            raise GridError("grid end points must be finite")
        if not self.t_end > self.t0:
            raise GridError(f"need t_end > t0, got [{self.t0}, {self.t_end}]")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.t_end - self.t0) / self.n

    def time(self, k: int) -> float:
        """Time of node ``k``, computed as ``t0 + k*h`` (never accumulated)."""
        return self.t0 + k * self.h

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n + 1) * self.h

    def coarsen(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t0, self.t_end, self.n // factor)


def _cumulative(increments: np.ndarray) -> np.ndarray:
    values = np.empty(increments.size + 1)
    values[0] = 0.0
    np.cumsum(increments, out=values[1:])
    return values


@dataclass(frozen=True, eq=False)
class WienerPath:
    """One realization of W on ``grid``.

    ``values`` holds W at the nodes, with ``values[0] == 0``.  When omitted it
    is built from the increments by a sequential prefix sum.
    """

    grid: TimeGrid
    increments: np.ndarray
    seed_label: str = "explicit"
    values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float)
        if inc.ndim != 1 or inc.size != self.grid.n:
            raise GridError(f"expected {self.grid.n} increments, got shape {inc.shape}")
        inc.flags.writeable = False
        object.__setattr__(self, "increments", inc)
        if self.values is None:
            vals = _cumulative(inc)
        else:
            vals = np.array(self.values, dtype=float)
            if vals.shape != (self.grid.n + 1,) or vals[0] != 0.0:
                raise GridError("node values must have n+1 entries starting at 0")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def total(self) -> float:
        """Displacement W(t_end) - W(t0)."""
        return float(self.values[-1])

    def __eq__(self, other):
        if not isinstance(other, WienerPath):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.increments, other.increments)

    __hash__ = None


def sample_path(grid: TimeGrid, stream: np.random.Generator) -> WienerPath:
    """Draw ``grid.n`` independent Normal(0, h) increments from ``stream``."""
    if not isinstance(grid, TimeGrid):
        raise GridError("sample_path needs a TimeGrid")
    inc = math.sqrt(grid.h) * stream.standard_normal(grid.n)
    return WienerPath(grid, inc, streams.label(stream))


def block_sums(increments: np.ndarray, factor: int) -> np.ndarray:
    """Left-to-right sums over consecutive blocks along the last axis."""
    inc = np.asarray(increments, dtype=float)
    n = inc.shape[-1]
    blocks = inc.reshape(inc.shape[:-1] + (n // factor, factor))
    # cumsum is strictly sequential; np.sum would use pairwise summation
    return np.cumsum(blocks, axis=-1)[..., -1]


def coarsen(path: WienerPath, factor: int) -> WienerPath:
    """Aggregate ``factor`` consecutive fine increments into each coarse one."""
    if isinstance(factor, bool) or int(factor) != factor or factor < 1:
        raise AggregationError(f"factor must be a positive integer, got {factor!r}")
    factor = int(factor)
    if path.grid.n % factor:
        raise AggregationError(f"factor {factor} does not divide n={path.grid.n}")
    if factor == 1:
        return path
    return WienerPath(
        path.grid.coarsen(factor),
        block_sums(path.increments, factor),
        path.seed_label,
        path.values[::factor],
    )


def bridge_refine(path: WienerPath, stream: np.random.Generator) -> WienerPath:
    """Split every step in two by Brownian-bridge interpolation.

    For a step of size h with increment dW and Z ~ N(0, 1) the halves are
    ``dW/2 - sqrt(h)*Z/2`` and ``dW/2 + sqrt(h)*Z/2``.
    """
    z = stream.standard_normal(path.grid.n)
    return _split(path, z)


def _split(path: WienerPath, z: np.ndarray) -> WienerPath:
    grid = path.grid
    half = 0.5 * path.increments
    spread = 0.5 * math.sqrt(grid.h) * z
    inc = np.empty(2 * grid.n)
    inc[0::2] = half - spread
    inc[1::2] = half + spread
    values = np.empty(2 * grid.n + 1)
    values[0::2] = path.values
    values[1::2] = path.values[:-1] + inc[0::2]
    return WienerPath(TimeGrid(grid.t0, grid.t_end, 2 * grid.n), inc, path.seed_label, values)


def value_at(path: WienerPath, k: int) -> float:
    """W at node ``k``; ``value_at(path, 0) == 0``."""
    if isinstance(k, bool) or int(k) != k or not 0 <= k <= path.grid.n:
        raise IndexDomainError(f"node index {k!r} outside 0..{path.grid.n}")
    return float(path.values[int(k)])


def write_path_csv(path: WienerPath, dest) -> Path:
    """Dump ``k,t,dW,W``, one row per step; row k describes step k ending at t_k."""
    dest = Path(dest)
    times = path.grid.times()
    with dest.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "dW", "W"])
        for k in range(1, path.grid.n + 1):
            w.writerow([k, repr(float(times[k])), repr(float(path.increments[k - 1])),
                        repr(float(path.values[k]))])
    return dest
