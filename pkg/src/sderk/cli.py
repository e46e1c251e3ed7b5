"""Command-line front end.

Subcommands: ``list-problems``, ``simulate``, ``converge``, ``check-solutions``.
Exit codes: 0 success, 1 usage, 2 experiment failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import problems, streams
from .convergence import (DEFAULT_N_FINE, DEFAULT_REALIZATIONS, ExperimentConfig,
                          factors_for_steps, ladder, resolve_problem, run_experiment,
                          sign_mode)
from .errors import CapabilityError, ConfigError, InterpretationError, SdeError
from .steppers import SchemeId, SignMode, SignSequence, integrate
from .wiener import TimeGrid, coarsen, sample_path, write_path_csv

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_IO = 0, 1, 2, 3
DEFAULT_SEED = 0
DEFAULT_TOLERANCE = 1e-4

log = logging.getLogger("sderk")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _problem_option(p, required=True):
    p.add_argument("--problem", required=required, help="catalogue id (see list-problems)")


def _model_options(p):
    p.add_argument("--scheme", default="rk", choices=[s.value for s in SchemeId])
    p.add_argument("--interpretation", choices=["ito", "stratonovich"],
                   help="read the problem's coefficients under this calculus")
    p.add_argument("--to-ito", action="store_true",
                   help="convert a Stratonovich problem to its Itô form before integrating")
    p.add_argument("--signs", default="auto", choices=["auto", "rademacher", "zero"])
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--n-fine", type=int, default=None)
    p.add_argument("--levels", default=None,
                   help="level count (e.g. 9) or comma-separated step counts (e.g. 16,32,64)")
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--config", default=None,
                   help="JSON file of option defaults, e.g. {\"n_fine\": 4096, \"seed\": 7}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sderk", description="Strong-order SDE integration experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("list-problems", help="show the test-problem catalogue")

    sim = sub.add_parser("simulate", help="one realization integrated at several step sizes")
    _problem_option(sim)
    _model_options(sim)
    sim.add_argument("--n", type=int, default=None, help="single level with this many steps")
    sim.add_argument("--realization", type=int, default=0)
    sim.add_argument("--dump-paths", action="store_true",
                     help="also write the fine Wiener path as k,t,dW,W")

    conv = sub.add_parser("converge", help="RMS error against step size")
    _problem_option(conv)
    _model_options(conv)
    conv.add_argument("--realizations", type=int, default=DEFAULT_REALIZATIONS)
    conv.add_argument("--workers", type=int, default=1)
    conv.add_argument("--bridge-signs", action="store_true",
                      help="experimental: derive signs from the Brownian bridge of each step")

    chk = sub.add_parser("check-solutions", help="verify closed-form solutions by Itô's formula")
    _problem_option(chk, required=False)
    chk.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    chk.add_argument("--points", type=int, default=100)
    parser.subcommands = {"simulate": sim, "converge": conv}
    return parser


def _apply_config_file(parser, args, argv):
    """Re-parse with defaults taken from ``--config``; explicit flags still win."""
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: expected a JSON object")
    sub = parser.subcommands[args.command]
    known = {a.dest for a in sub._actions}
    values = {}
    for key, value in raw.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest in ("config", "help") or dest not in known:
            raise UsageError(f"{path}: unknown option {key!r} for {args.command}")
        if dest == "levels" and isinstance(value, list):
            value = ",".join(str(v) for v in value)
        values[dest] = value
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def _levels(text: str | None, n_fine: int | None, default_count: int | None = 9):
    """Return (n_fine, ascending coarsening factors)."""
    if text is None or "," not in text:
        count = default_count if text is None else int(text)
        n_fine = n_fine or DEFAULT_N_FINE
        return n_fine, ladder(n_fine, count)
    steps = sorted({int(s) for s in text.split(",") if s.strip()})
    n_fine = n_fine or max(steps)
    return n_fine, factors_for_steps(n_fine, steps)


def _config(args, **extra) -> ExperimentConfig:
    problems.get_entry(args.problem)
    n_fine, factors = _levels(args.levels, args.n_fine)
    return ExperimentConfig(
        problem_id=args.problem, scheme=args.scheme, n_fine=n_fine, levels=tuple(factors),
        master_seed=args.seed, t0=args.t0, t_end=args.t_end, signs=args.signs,
        interpretation=args.interpretation, to_ito=args.to_ito, **extra)


def _write(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    Path(output).write_text(text)


def cmd_list_problems(args) -> int:
    def show(entries):
        for e in entries:
            p = e.problem
            print(f"{e.id:14s} order {int(e.expected_order)}  [{p.interpretation.value}, dim {p.dim}]")
            print(f"    SDE:      {e.sde}")
            print(f"    solution: {e.solution}")

    print("Catalogue:")
    show(problems.catalogue())
    print("Auxiliary:")
    show(problems.extras())
    return EXIT_OK


def cmd_converge(args) -> int:
    config = _config(args, realizations=args.realizations, bridge_signs=args.bridge_signs)
    report = run_experiment(config, workers=max(1, args.workers))
    text = report.to_json() if args.format == "json" else report.to_csv()
    _write(text, args.output)
    slope = "undefined" if report.slope is None else f"{report.slope:.4f}"
    print(f"{config.problem_id} [{config.scheme.value}] slope {slope} over "
          f"{report.fitted_levels} levels, M={config.realizations}, "
          f"{report.wall_time:.1f}s ({report.backend})", file=sys.stderr)
    for msg in report.failures:
        print(f"failure: {msg}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_simulate(args) -> int:
    if args.n is not None:
        if args.levels is not None:
            raise UsageError("give either --n or --levels, not both")
        args.levels = f"{args.n},"
    elif args.levels is not None and "," not in args.levels:
        count = int(args.levels)
        args.levels = ",".join(str(16 * 2 ** j) for j in range(count))
    if args.levels is None:
        args.levels = "16,32,64,128,256"
    config = _config(args, realizations=2)
    problem = resolve_problem(config)
    mode = sign_mode(config, problem)
    grid = TimeGrid(config.t0, config.t_end, config.n_fine)
    fine = sample_path(grid, streams.derive(config.master_seed, args.realization, "wiener"))

    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for factor in sorted(config.levels, reverse=True):
        path = coarsen(fine, factor)
        n = path.grid.n
        signs = None
        if config.scheme is SchemeId.RK_PAPER:
            if mode is SignMode.RADEMACHER:
                signs = SignSequence.rademacher(
                    streams.derive(config.master_seed, args.realization, "signs", n))
            else:
                signs = SignSequence.zero()
        traj = integrate(problem, path, config.scheme, signs)
        results.append((n, traj, path))

    base = args.problem
    if args.format == "json":
        doc = {"problem": base, "scheme": config.scheme.value, "seed": config.master_seed,
               "realization": args.realization, "levels": [
                   {"n": n, "t": traj.times.tolist(), "X": traj.states.tolist(),
                    "W": path.values.tolist(), "clamps": traj.clamp_count}
                   for n, traj, path in results]}
        (out / f"{base}.json").write_text(json.dumps(doc) + "\n")
    else:
        for n, traj, path in results:
            _write_trajectory(out / f"{base}_n{n}.csv", traj, path)
    if args.dump_paths:
        write_path_csv(fine, out / f"{base}_path.csv")
    for n, traj, _ in results:
        final = ", ".join(f"{v:.6g}" for v in traj.final)
        print(f"{base} n={n}: X(t_end)=[{final}] clamps={traj.clamp_count}", file=sys.stderr)
    return EXIT_OK


def _write_trajectory(dest: Path, traj, path) -> None:
    dim = traj.states.shape[1]
    cols = ["X"] if dim == 1 else [f"X{i + 1}" for i in range(dim)]
    lines = [",".join(["t"] + cols + ["W"])]
    times = traj.times
    for k in range(traj.grid.n + 1):
        row = [repr(float(times[k]))] + [repr(float(v)) for v in traj.states[k]]
        row.append(repr(float(path.values[k])))
        lines.append(",".join(row))
    dest.write_text("\n".join(lines) + "\n")


def cmd_check_solutions(args) -> int:
    entries = problems.catalogue()
    if args.problem:
        entries = [problems.get_entry(args.problem)]
    points = problems.residual_points(args.points)
    print(f"{'problem':14s} {'drift residual':>15s} {'vol residual':>15s}  result")
    failed = 0
    for e in entries:
        dr, vr = problems.max_residuals(e.problem, points)
        ok = dr < args.tolerance and vr < args.tolerance
        failed += not ok
        print(f"{e.id:14s} {dr:15.3e} {vr:15.3e}  {'pass' if ok else 'FAIL'}")
    print(f"{len(entries) - failed}/{len(entries)} within tolerance {args.tolerance:g}")
    return EXIT_OK if not failed else EXIT_FAILED


COMMANDS = {
    "list-problems": cmd_list_problems,
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "check-solutions": cmd_check_solutions,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config_file(parser, args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except problems.UnknownProblemError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ConfigError, CapabilityError, InterpretationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SdeError as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
