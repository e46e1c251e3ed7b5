"""Monte-Carlo strong-convergence experiments.

For each realization a Wiener path is drawn on the finest grid, then summed
down to every coarser level, integrated, and compared with the closed-form
solution at the final time.  Per-level RMS errors are fitted by least
squares in log-log space.

Realization ``i`` draws its path from stream ``(seed, i, "wiener")`` and the
signs for a level with ``n`` steps from ``(seed, i, "signs", n)``.  Work is
split into fixed-size blocks of realizations; per-realization results are
gathered in index order before any reduction, so reports do not depend on
how many workers ran.
"""
from __future__ import annotations

import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels, streams
from .errors import CapabilityError, ConfigError, EvaluationError
from .problems import SdeProblem, get_problem, reinterpret, stratonovich_to_ito
from .steppers import SchemeId, SignMode, SignSequence, check_compatible, integrate
from .wiener import TimeGrid, WienerPath, block_sums, coarsen

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
NOISE_FLOOR = 1e3 * EPS
ABORT_LIMIT = 0.01
BLOCK = 32

DEFAULT_N_FINE = 2 ** 14
DEFAULT_LEVELS = 9
DEFAULT_COARSEST_STEPS = 16
DEFAULT_REALIZATIONS = 400


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def ladder(n_fine: int = DEFAULT_N_FINE, count: int = DEFAULT_LEVELS,
           coarsest_steps: int = DEFAULT_COARSEST_STEPS) -> list:
    """Coarsening factors for ``count`` levels starting at ``coarsest_steps`` steps.

    >>> ladder(2 ** 14, 9)[:3], ladder(2 ** 14, 9)[-1]
    ([4, 8, 16], 1024)
    """
    if count < 1:
        raise ConfigError("need at least one level")
    finest = coarsest_steps * 2 ** (count - 1)
    if finest > n_fine or n_fine % finest:
        raise ConfigError(f"{count} levels from {coarsest_steps} steps need n_fine >= {finest}")
    return sorted(n_fine // (coarsest_steps * 2 ** j) for j in range(count))


def factors_for_steps(n_fine: int, steps: Sequence[int]) -> list:
    out = []
    for n in steps:
        if n < 1 or n_fine % n:
            raise ConfigError(f"{n} steps does not divide the fine grid of {n_fine}")
        out.append(n_fine // n)
    return sorted(out)


@dataclass(frozen=True)
class ExperimentConfig:
    problem_id: str
    scheme: SchemeId = SchemeId.RK_PAPER
    n_fine: int = DEFAULT_N_FINE
    levels: tuple = ()
    realizations: int = DEFAULT_REALIZATIONS
    master_seed: int = 0
    t0: float = 0.0
    t_end: float = 1.0
    signs: str = "auto"
    interpretation: Optional[str] = None
    to_ito: bool = False
    bridge_signs: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", SchemeId.parse(self.scheme))
        levels = tuple(int(f) for f in (self.levels or ladder(self.n_fine)))
        object.__setattr__(self, "levels", levels)
        if not _is_pow2(self.n_fine):
            raise ConfigError(f"n_fine must be a power of two, got {self.n_fine}")
        if not levels:
            raise ConfigError("levels must be non-empty")
        if any(not _is_pow2(f) or self.n_fine % f for f in levels):
            raise ConfigError(f"every level factor must be a power of two dividing {self.n_fine}")
        if list(levels) != sorted(set(levels)):
            raise ConfigError("level factors must be strictly ascending")
        if self.realizations < 2:
            raise ConfigError("need at least two realizations")
        if self.master_seed < 0:
            raise ConfigError("seed must be non-negative")
        if not self.t_end > self.t0:
            raise ConfigError("t_end must exceed t0")
        if self.signs not in ("auto", "rademacher", "zero"):
            raise ConfigError(f"signs must be auto, rademacher or zero, got {self.signs!r}")

    def echo(self) -> dict:
        d = asdict(self)
        d["scheme"] = self.scheme.value
        d["levels"] = list(self.levels)
        return d


@dataclass
class LevelRecord:
    factor: int
    n_steps: int
    h: float
    rms_error: float
    samples: int
    aborts: int
    clamp_count: int

    @property
    def usable(self) -> bool:
        return self.samples > 0


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    levels: list
    slope: Optional[float]
    intercept: Optional[float]
    fitted_levels: int = 0
    failures: list = field(default_factory=list)
    wall_time: float = 0.0
    backend: str = ""

    @property
    def ok(self) -> bool:
        return not self.failures and all(r.usable for r in self.levels)

    def points(self) -> list:
        return [(r.h, r.rms_error) for r in self.levels]

    def to_dict(self) -> dict:
        """Serializable content; wall time is left out so reruns compare equal."""
        return {
            "config": self.config.echo(),
            "levels": [
                {"level": i, "factor": r.factor, "n_steps": r.n_steps, "h": r.h,
                 "rms_error": None if math.isnan(r.rms_error) else r.rms_error,
                 "samples": r.samples, "aborts": r.aborts, "clamps": r.clamp_count}
                for i, r in enumerate(self.levels)
            ],
            "slope": self.slope,
            "intercept": self.intercept,
            "fitted_levels": self.fitted_levels,
            "failures": list(self.failures),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("level,h,rms_error,samples,aborts\n")
        for i, r in enumerate(self.levels):
            buf.write(f"{i},{r.h!r},{r.rms_error!r},{r.samples},{r.aborts}\n")
        cfg = self.config
        meta = [
            ("problem", cfg.problem_id),
            ("scheme", cfg.scheme.value),
            ("slope", "undefined" if self.slope is None else repr(self.slope)),
            ("intercept", "undefined" if self.intercept is None else repr(self.intercept)),
            ("fitted_levels", self.fitted_levels),
            ("seed", cfg.master_seed),
            ("realizations", cfg.realizations),
            ("n_fine", cfg.n_fine),
            ("t0", repr(cfg.t0)),
            ("t_end", repr(cfg.t_end)),
            ("signs", cfg.signs),
            ("interpretation", cfg.interpretation or ""),
            ("to_ito", cfg.to_ito),
            ("bridge_signs", cfg.bridge_signs),
            ("factors", ";".join(str(r.factor) for r in self.levels)),
            ("clamps", ";".join(str(r.clamp_count) for r in self.levels)),
        ]
        for key, value in meta:
            buf.write(f"# {key}={value}\n")
        for msg in self.failures:
            buf.write(f"# failure={msg}\n")
        return buf.getvalue()


def parse_csv(text: str) -> dict:
    """Read back a CSV report into the same layout as ``to_dict``."""
    rows, meta, failures = [], {}, []
    lines = text.splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            if key == "failure":
                failures.append(value)
            else:
                meta[key] = value
        elif line:
            rows.append(dict(zip(header, line.split(","))))
    factors = [int(v) for v in meta["factors"].split(";")] if meta.get("factors") else []
    clamps = [int(v) for v in meta["clamps"].split(";")] if meta.get("clamps") else []

    def num(v):
        return None if v == "undefined" else float(v)

    levels = []
    for i, row in enumerate(rows):
        rms = float(row["rms_error"])
        h = float(row["h"])
        levels.append({"level": int(row["level"]), "factor": factors[i],
                       "n_steps": int(round((float(meta["t_end"]) - float(meta["t0"])) / h)),
                       "h": h, "rms_error": None if math.isnan(rms) else rms,
                       "samples": int(row["samples"]), "aborts": int(row["aborts"]),
                       "clamps": clamps[i]})
    return {"levels": levels, "slope": num(meta["slope"]), "intercept": num(meta["intercept"]),
            "fitted_levels": int(meta["fitted_levels"]), "seed": int(meta["seed"]),
            "problem": meta["problem"], "scheme": meta["scheme"], "failures": failures}


def fit_slope(points, floor: float | Sequence[float] = NOISE_FLOOR):
    """Least-squares line through ``(ln h, ln rms)``.

    Points with rms below ``floor`` (zeros included) or non-finite are dropped
    first.  Returns ``(slope, intercept)``, or ``(None, None)`` when fewer than
    two points survive.
    """
    pts = list(points)
    floors = np.broadcast_to(np.asarray(floor, dtype=float), (len(pts),))
    xs, ys = [], []
    for (h, rms), lo in zip(pts, floors):
        if rms is None or not math.isfinite(rms) or rms < lo or rms <= 0 or h <= 0:
            continue
        xs.append(math.log(h))
        ys.append(math.log(rms))
    if len(xs) < 2:
        return None, None
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(slope), float(intercept)


def resolve_problem(config: ExperimentConfig) -> SdeProblem:
    problem = get_problem(config.problem_id)
    if config.interpretation:
        problem = reinterpret(problem, config.interpretation)
    if config.to_ito and not problem.is_ito:
        problem = stratonovich_to_ito(problem)
    return problem


def sign_mode(config: ExperimentConfig, problem: SdeProblem) -> SignMode:
    if config.signs == "auto":
        return SignMode.RADEMACHER if problem.is_ito else SignMode.ZERO
    return SignMode(config.signs)


def level_signs(master_seed: int, index: int, n_steps: int) -> np.ndarray:
    """Fresh Rademacher signs for one realization on an ``n_steps`` grid."""
    stream = streams.derive(master_seed, index, "signs", n_steps)
    return SignSequence.rademacher(stream).draw(n_steps)


def bridge_signs(fine: np.ndarray, factor: int) -> np.ndarray:
    """Signs tied to the Brownian bridge of each coarse step (experimental).

    Each coarse step splits into two halves d1, d2 taken from the fine path;
    the bridge variable is proportional to d2 - d1 and the sign is its sign
    (+1 on ties).  Needs ``factor >= 2``.
    """
    halves = block_sums(fine, factor // 2)
    d1, d2 = halves[..., 0::2], halves[..., 1::2]
    return np.where(d2 - d1 < 0, -1.0, 1.0)


def _sample_fine(config: ExperimentConfig, lo: int, hi: int) -> np.ndarray:
    grid = TimeGrid(config.t0, config.t_end, config.n_fine)
    sq = math.sqrt(grid.h)
    out = np.empty((hi - lo, config.n_fine))
    for row, i in enumerate(range(lo, hi)):
        out[row] = sq * streams.derive(config.master_seed, i, "wiener").standard_normal(config.n_fine)
    return out


def _run_block(config, problem, mode, lo, hi):
    fine = _sample_fine(config, lo, hi)
    w_end = np.cumsum(fine, axis=1)[:, -1]
    h_fine = (config.t_end - config.t0) / config.n_fine
    per_level = []
    for factor in config.levels:
        n_steps = config.n_fine // factor
        dW = block_sums(fine, factor) if factor > 1 else fine
        S = None
        if config.scheme is SchemeId.RK_PAPER and mode is SignMode.RADEMACHER:
            if config.bridge_signs and factor >= 2:
                S = bridge_signs(fine, factor)
            else:
                S = np.stack([level_signs(config.master_seed, i, n_steps) for i in range(lo, hi)])
        res = kernels.advance(config.scheme.value, problem, dW, S, t0=config.t0,
                              h=h_fine * factor)
        per_level.append((res.final, res.clamps, res.aborted, res.backend))
    return w_end, per_level


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   problem: SdeProblem | None = None) -> ConvergenceReport:
    """Run the multi-level RMS experiment described by ``config``.

    ``problem`` overrides the catalogue lookup (the id is then only a label).
    """
    started = time.perf_counter()
    if problem is None:
        problem = resolve_problem(config)
    if problem.exact_solution is None:
        raise CapabilityError(f"{problem.name}: strong errors need a closed-form solution")
    mode = sign_mode(config, problem)
    check_compatible(problem, config.scheme, SignSequence(mode, np.random.default_rng(0)))

    M = config.realizations
    blocks = [(lo, min(lo + BLOCK, M)) for lo in range(0, M, BLOCK)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: _run_block(config, problem, mode, *b), blocks))
    else:
        results = [_run_block(config, problem, mode, *b) for b in blocks]

    w_end = np.concatenate([r[0] for r in results])
    exact = np.asarray(problem.solution(config.t_end, w_end), dtype=float)
    if exact.size == M * problem.dim:
        exact = exact.reshape(M, problem.dim)
    else:  # solutions that ignore W may come back unbroadcast
        exact = np.broadcast_to(exact.reshape(-1), (M, problem.dim))
    scale = max(1.0, math.sqrt(math.fsum(np.sum(exact * exact, axis=1)) / M))
    h_fine = (config.t_end - config.t0) / config.n_fine

    records, failures = [], []
    backend = results[0][1][0][3] if results else ""
    for j, factor in enumerate(config.levels):
        final = np.concatenate([r[1][j][0] for r in results])
        clamps = np.concatenate([r[1][j][1] for r in results])
        aborted = np.concatenate([r[1][j][2] for r in results])
        err = np.sqrt(np.sum((final - exact) ** 2, axis=1))
        good = ~aborted & np.isfinite(err)
        n_good = int(good.sum())
        n_abort = M - n_good
        rms = math.sqrt(math.fsum((err[good] ** 2).tolist()) / n_good) if n_good else math.nan
        h = h_fine * factor
        records.append(LevelRecord(factor, config.n_fine // factor, h, rms, n_good, n_abort,
                                   int(clamps.sum())))
        if n_good == 0:
            failures.append(f"h={h!r}: every realization aborted; level unusable")
        elif n_abort > ABORT_LIMIT * M:
            failures.append(f"h={h!r}: {n_abort}/{M} realizations aborted (limit 1%)")
    for msg in failures:
        log.warning("%s/%s: %s", config.problem_id, config.scheme.value, msg)

    usable = [r for r in records if r.usable]
    slope, intercept = fit_slope([(r.h, r.rms_error) for r in usable], NOISE_FLOOR * scale)
    fitted = sum(1 for r in usable if r.rms_error >= NOISE_FLOOR * scale)
    if slope is None:
        log.info("%s: fewer than two levels above the noise floor; slope undefined",
                 config.problem_id)
    return ConvergenceReport(config, records, slope, intercept, fitted, failures,
                             time.perf_counter() - started, backend)


def strong_error(problem: SdeProblem, scheme, path: WienerPath, level_factor: int,
                 sign_seed: int | None = None, realization: int = 0) -> float:
    """Final-time error of one realization integrated on a coarsened path.

    Signs come from stream ``(sign_seed, realization, "signs", n)`` as in
    :func:`run_experiment`.  The reference uses the fine path's W(t_end).
    Raises :class:`EvaluationError` if the integration aborts.
    """
    scheme = SchemeId.parse(scheme)
    if problem.exact_solution is None:
        raise CapabilityError(f"{problem.name}: strong errors need a closed-form solution")
    coarse = coarsen(path, level_factor)
    signs = None
    if scheme is SchemeId.RK_PAPER:
        if problem.is_ito:
            if sign_seed is None:
                raise ValueError("Itô problems need a sign seed for the rk scheme")
            stream = streams.derive(sign_seed, realization, "signs", coarse.grid.n)
            signs = SignSequence.rademacher(stream)
        else:
            signs = SignSequence.zero()
    traj = integrate(problem, coarse, scheme, signs)
    exact = problem.solution(path.grid.t_end, path.total).reshape(problem.dim)
    return float(np.sqrt(np.sum((traj.final - exact) ** 2)))


__all__ = [
    "ConvergenceReport", "EvaluationError", "ExperimentConfig", "LevelRecord",
    "factors_for_steps", "fit_slope", "ladder", "parse_csv", "run_experiment",
    "strong_error",
]
