"""Benchmark-suite runner: test generation versus random testing."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

from .driver import DriverConfig, generate_tests, random_baseline
from .lang.parser import FpcError, parse
from .lang.typecheck import typecheck

MANIFEST = "manifest.json"


@dataclass
class BenchRow:
    name: str
    file: str
    entry: str
    branches: int = 0
    time: float = 0.0
    generator_pct: float = 0.0
    rand_pct: float = 0.0
    improvement: float = 0.0
    line_pct: float = 0.0
    infeasible: List[str] = field(default_factory=list)
    expected_feasible_branches: Optional[int] = None
    error: Optional[str] = None


@dataclass
class BenchReport:
    rows: List[BenchRow]
    rand_factor: float = 10.0

    @property
    def ok_rows(self) -> List[BenchRow]:
        return [r for r in self.rows if r.error is None]

    def mean(self) -> Optional[dict]:
        rows = self.ok_rows
        if len(rows) < 2:
            return None
        n = len(rows)
        return {
            "name": "MEAN",
            "branches": round(sum(r.branches for r in rows) / n, 1),
            "time": round(sum(r.time for r in rows) / n, 3),
            "generator_pct": round(sum(r.generator_pct for r in rows) / n, 1),
            "rand_pct": round(sum(r.rand_pct for r in rows) / n, 1),
            "improvement": round(sum(r.improvement for r in rows) / n, 1),
            "line_pct": round(sum(r.line_pct for r in rows) / n, 1),
        }

    def to_dict(self) -> dict:
        out = {"rand_factor": self.rand_factor, "benchmarks": [asdict(r) for r in self.rows]}
        mean = self.mean()
        if mean is not None:
            out["mean"] = mean
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        header = ("benchmark", "#branches", "time(s)", "branch%", "rand%", "improvement", "line%")
        lines = []
        for r in self.rows:
            if r.error is not None:
                lines.append((r.name, "error", r.error, "", "", "", ""))
                continue
            lines.append((r.name, str(r.branches), f"{r.time:.2f}", f"{r.generator_pct:.1f}",
                          f"{r.rand_pct:.1f}", f"{r.improvement:+.1f}", f"{r.line_pct:.1f}"))
        mean = self.mean()
        if mean is not None:
            lines.append(("MEAN", f"{mean['branches']:.1f}", f"{mean['time']:.2f}",
                          f"{mean['generator_pct']:.1f}", f"{mean['rand_pct']:.1f}",
                          f"{mean['improvement']:+.1f}", f"{mean['line_pct']:.1f}"))
        widths = [max(len(row[i]) for row in [header, *lines]) for i in range(len(header))]
        fmt = lambda row: "  ".join(  # noqa: E731
            cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))
        )
        out = [fmt(header), "  ".join("-" * w for w in widths)]
        out.extend(fmt(row) for row in lines)
        return "\n".join(out)


def load_manifest(directory) -> List[dict]:
    """Entries of ``manifest.json``; without one, every ``.fpc`` file with
    its last function as entry."""
    directory = Path(directory)
    path = directory / MANIFEST
    if path.exists():
        data = json.loads(path.read_text())
        return list(data.get("benchmarks", []))
    return [{"file": p.name} for p in sorted(directory.glob("*.fpc"))]


def run_benchmark(path, entry: Optional[str], cfg: DriverConfig, rand_factor: float = 10.0,
                  expected: Optional[int] = None) -> BenchRow:
    path = Path(path)
    name = path.stem
    row = BenchRow(name, path.name, entry or "", expected_feasible_branches=expected)
    try:
        typed = typecheck(parse(path.read_text(), entry))
    except (OSError, FpcError) as exc:
        row.error = str(exc)
        return row
    row.entry = typed.entry
    suite = generate_tests(typed, cfg=cfg)
    rep = suite.report()
    rand_seed = None if cfg.seed is None else cfg.seed + 1
    rand = random_baseline(typed, budget=rand_factor * suite.wall_time, rng=rand_seed,
                           sampler=cfg.sampler, step_budget=cfg.step_budget)
    rrep = rand.report()
    row.branches = rep.branches_total
    row.time = round(suite.wall_time, 3)
    row.generator_pct = rep.branch_pct
    row.rand_pct = rrep.branch_pct
    row.improvement = round(rep.branch_pct - rrep.branch_pct, 1)
    row.line_pct = rep.line_pct
    row.infeasible = rep.infeasible
    return row


def run_benchmark_suite(directory, cfg: DriverConfig = DriverConfig(),
                        rand_factor: float = 10.0, only: Optional[List[str]] = None) -> BenchReport:
    """Run every benchmark listed for ``directory``; a benchmark that fails
    to load is reported as an error row and the suite continues."""
    directory = Path(directory)
    rows = []
    for item in load_manifest(directory):
        name = os.path.splitext(item["file"])[0]
        if only is not None and name not in only:
            continue
        rows.append(run_benchmark(directory / item["file"], item.get("entry"), cfg, rand_factor,
                                  item.get("expected_feasible_branches")))
    return BenchReport(rows, rand_factor)


def default_suite_dir() -> Path:
    return Path(__file__).resolve().parent / "benchmarks"
