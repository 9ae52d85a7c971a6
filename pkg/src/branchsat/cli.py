"""Command-line interface: ``branchsat {cover,rand,bench,dump-instrumented}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from .bench import default_suite_dir, run_benchmark_suite
from .driver import DriverConfig, SamplerConfig, TestSuite, generate_tests, random_baseline
from .instrument import InstrumentError, instrument
from .lang.parser import FpcError, parse
from .lang.typecheck import typecheck
from .optimize import LocalMinConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCOMPLETE = 2

SEED_ENV = "BRANCHSAT_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _driver_flags(p: argparse.ArgumentParser) -> None:
    d = DriverConfig()
    lm = LocalMinConfig()
    s = SamplerConfig()
    g = p.add_argument_group("search configuration")
    g.add_argument("--n-start", type=int, default=d.n_start, help="number of random starting points")
    g.add_argument("--n-iter", type=int, default=d.n_iter, help="Basinhopping rounds per start")
    g.add_argument("--step-size", type=float, default=d.step_size, help="perturbation half-width")
    g.add_argument("--temperature", type=float, default=d.temperature, help="Metropolis temperature")
    g.add_argument("--epsilon", type=float, default=d.epsilon, help="strict-comparison margin")
    g.add_argument("--wall-budget", type=float, default=d.wall_budget, help="seconds per run")
    g.add_argument("--step-budget", type=int, default=d.step_budget,
                   help="interpreter steps per execution")
    g.add_argument("--ftol", type=float, default=lm.ftol, help="Powell value tolerance")
    g.add_argument("--xtol", type=float, default=lm.xtol, help="Powell coordinate tolerance")
    g.add_argument("--max-iter", type=int, default=lm.max_iter, help="Powell sweeps")
    g.add_argument("--direction-scale", type=float, default=lm.direction_scale,
                   help="initial Powell direction length relative to |x0|")
    g.add_argument("--sampler-wide-pct", type=float, default=s.wide_pct,
                   help="probability of a wide-range start coordinate")
    g.add_argument("--sampler-special-pct", type=float, default=s.special_pct,
                   help="probability of a special start coordinate")
    g.add_argument("--sampler-narrow-range", type=float, default=s.narrow_range,
                   help="half-width of the narrow start range")
    g.add_argument("--sampler-wide-range", type=float, default=s.wide_range,
                   help="half-width of the wide start range")
    g.add_argument("--literal-last-sample", action="store_true",
                   help="return the chain's last point instead of the best seen")
    g.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--format", choices=("text", "json"), default="text", help="output format")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0


def config_from_args(args) -> DriverConfig:
    try:
        return DriverConfig(
            n_start=args.n_start,
            n_iter=args.n_iter,
            lm=LocalMinConfig(args.ftol, args.xtol, args.max_iter, args.direction_scale),
            step_size=args.step_size,
            temperature=args.temperature,
            epsilon=args.epsilon,
            step_budget=args.step_budget,
            wall_budget=args.wall_budget,
            sampler=SamplerConfig(args.sampler_wide_pct, args.sampler_special_pct,
                                  args.sampler_narrow_range, args.sampler_wide_range),
            seed=_seed(args),
            literal_last_sample=args.literal_last_sample,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="branchsat", description="Branch-coverage test generation for FPC programs.",
                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cover = sub.add_parser("cover", help="generate a branch-covering test suite", formatter_class=fmt)
    cover.add_argument("source", help="FPC source file")
    cover.add_argument("--entry", required=True, help="function under test")
    cover.add_argument("--targets", default=None,
                       help="comma-separated functions to instrument (default: the entry)")
    _driver_flags(cover)

    rand = sub.add_parser("rand", help="random-testing baseline", formatter_class=fmt)
    rand.add_argument("source", help="FPC source file")
    rand.add_argument("--entry", required=True, help="function under test")
    rand.add_argument("--targets", default=None, help="comma-separated functions to measure")
    rand.add_argument("--trials", type=int, default=None, help="number of random inputs")
    _driver_flags(rand)

    bench = sub.add_parser("bench", help="run a benchmark suite against random testing",
                           formatter_class=fmt)
    bench.add_argument("directory", nargs="?", default=None,
                       help="suite directory with manifest.json (default: bundled suite)")
    bench.add_argument("--only", default=None, help="comma-separated benchmark names")
    bench.add_argument("--rand-factor", type=float, default=10.0,
                       help="random testing gets this multiple of the generator's wall time")
    _driver_flags(bench)

    dump = sub.add_parser("dump-instrumented", help="print the program with pen annotations",
                          formatter_class=fmt)
    dump.add_argument("source", help="FPC source file")
    dump.add_argument("--entry", required=True, help="function under test")
    dump.add_argument("--targets", default=None, help="comma-separated functions to instrument")
    return parser


def _load(args):
    path = Path(args.source)
    try:
        source = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    program = parse(source, args.entry)
    if args.entry not in {fn.name for fn in program.functions}:
        raise UsageError(f"no function named {args.entry!r} in {path}")
    return typecheck(program)


def _targets(args) -> Optional[List[str]]:
    if args.targets is None:
        return None
    return [t.strip() for t in args.targets.split(",") if t.strip()]


def _fmt_input(x) -> dict:
    return {"hex": [float(v).hex() for v in x], "decimal": [repr(float(v)) for v in x]}


def suite_to_dict(suite: TestSuite) -> dict:
    out = suite.report().to_dict()
    out["termination"] = suite.termination
    out["starts"] = suite.starts
    out["tests"] = [
        {
            "input": _fmt_input(t.x),
            "taken": [str(b) for b in t.taken],
            "new": sorted(str(b) for b in t.newly_saturated),
        }
        for t in suite.inputs
    ]
    return out


def format_suite(suite: TestSuite, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(suite_to_dict(suite), indent=2, sort_keys=True)
    lines = [suite.report().to_text(), f"termination: {suite.termination} after {suite.starts} starts"]
    for i, t in enumerate(suite.inputs):
        hexes = ", ".join(float(v).hex() for v in t.x)
        decs = ", ".join(repr(float(v)) for v in t.x)
        new = " ".join(sorted(str(b) for b in t.newly_saturated)) or "-"
        lines.append(f"test {i}: ({hexes})  = ({decs})  new: {new}")
    return "\n".join(lines)


def format_report(report, fmt: str) -> str:
    """Render a CoverageReport or BenchReport as text or JSON."""
    return report.to_json() if fmt == "json" else report.to_text()


def _exit_for(suite: TestSuite) -> int:
    cov = suite.coverage
    return EXIT_OK if cov.covered >= cov.universe else EXIT_INCOMPLETE


def _run(args) -> int:
    if args.command == "dump-instrumented":
        typed = _load(args)
        print(instrument(typed, _targets(args)).dump(), end="")
        return EXIT_OK
    cfg = config_from_args(args)
    if args.command == "cover":
        typed = _load(args)
        suite = generate_tests(typed, targets=_targets(args), cfg=cfg)
        print(format_suite(suite, args.format))
        return _exit_for(suite)
    if args.command == "rand":
        typed = _load(args)
        trials = args.trials
        if trials is not None and trials < 0:
            raise UsageError("--trials must be non-negative")
        budget = None if trials is not None else cfg.wall_budget
        suite = random_baseline(typed, budget=budget, trials=trials, rng=cfg.seed,
                                targets=_targets(args), sampler=cfg.sampler,
                                step_budget=cfg.step_budget)
        print(format_suite(suite, args.format))
        return _exit_for(suite)
    if args.command == "bench":
        directory = Path(args.directory) if args.directory else default_suite_dir()
        if not directory.is_dir():
            raise UsageError(f"not a directory: {directory}")
        only = None if args.only is None else [s.strip() for s in args.only.split(",")]
        report = run_benchmark_suite(directory, cfg, args.rand_factor, only)
        print(format_report(report, args.format))
        return EXIT_OK
    raise UsageError(f"unknown command {args.command!r}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except (UsageError, FpcError, InstrumentError) as exc:
        print(f"branchsat: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
