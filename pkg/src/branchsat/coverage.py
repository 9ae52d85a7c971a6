"""Covered, saturated and infeasible branch bookkeeping."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import FrozenSet, Iterable, List, Optional

from .lang.cfg import CFG, build_program_cfg
from .lang.nodes import Block, BranchId, iter_statements, sort_branches


def saturated(cfg: CFG, universe: FrozenSet[BranchId], covered: FrozenSet[BranchId],
              infeasible: FrozenSet[BranchId]) -> FrozenSet[BranchId]:
    """Covered branches whose in-universe descendants are all covered or infeasible,
    together with the infeasible branches themselves.

    Descendants are collected without crossing infeasible edges: a branch
    reachable only through an infeasible one cannot be reached either.
    """
    done = covered | infeasible
    out = set(infeasible)
    blocked = frozenset(infeasible)
    for b in covered:
        if (cfg.descendants(b, blocked) & universe) <= done:
            out.add(b)
    return frozenset(out & universe)


@dataclass(frozen=True)
class CoverageState:
    cfg: CFG = field(repr=False, compare=False)
    universe: FrozenSet[BranchId]
    covered: FrozenSet[BranchId] = frozenset()
    explored: FrozenSet[BranchId] = frozenset()
    infeasible: FrozenSet[BranchId] = frozenset()
    lines_total: FrozenSet[int] = frozenset()
    lines_hit: FrozenSet[int] = frozenset()

    @classmethod
    def initial(cls, program, targets: Optional[Iterable[str]] = None) -> "CoverageState":
        """Empty state for the branches of ``targets`` (default: the entry)."""
        prog = getattr(program, "program", program)
        names = {prog.entry} if targets is None else set(targets)
        universe = set()
        lines = set()
        for fn in prog.functions:
            if fn.name not in names:
                continue
            for label in fn.labels:
                universe.update((BranchId(label, True), BranchId(label, False)))
            lines.update(s.line for s in iter_statements(fn.body) if not isinstance(s, Block))
        return cls(build_program_cfg(prog), frozenset(universe), lines_total=frozenset(lines))

    @property
    def all_explored(self) -> bool:
        return self.explored >= self.universe

    def unexplored(self) -> List[BranchId]:
        return sort_branches(self.universe - self.explored)


def recompute_saturation(state: CoverageState) -> FrozenSet[BranchId]:
    return saturated(state.cfg, state.universe, state.covered, state.infeasible)


def record_trace(state: CoverageState, trace) -> CoverageState:
    covered = state.covered | (frozenset(trace.taken) & state.universe)
    lines = state.lines_hit | (frozenset(trace.lines) & state.lines_total)
    new = replace(state, covered=covered, lines_hit=lines)
    return replace(new, explored=state.explored | recompute_saturation(new))


def mark_infeasible_from(state: CoverageState, trace) -> CoverageState:
    """Flag the untaken side of the last conditional on ``trace`` as infeasible.

    A side that some earlier input already visited is feasible by
    definition and is left alone.
    """
    if not trace.taken:
        return state
    other = trace.taken[-1].other
    if other not in state.universe or other in state.explored or other in state.covered:
        return state
    new = replace(state, infeasible=state.infeasible | {other})
    return replace(new, explored=state.explored | recompute_saturation(new))


def _pct(part: int, whole: int) -> float:
    return 100.0 if whole == 0 else round(100.0 * part / whole, 1)


@dataclass(frozen=True)
class CoverageReport:
    branches_total: int
    branches_covered: int
    branch_pct: float
    lines_total: int
    lines_hit: int
    line_pct: float
    infeasible: List[str]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        flagged = ", ".join(self.infeasible) if self.infeasible else "-"
        return (
            f"branches: {self.branches_covered}/{self.branches_total} ({self.branch_pct:.1f}%)\n"
            f"lines:    {self.lines_hit}/{self.lines_total} ({self.line_pct:.1f}%)\n"
            f"infeasible: {flagged}"
        )


def report(state: CoverageState, program=None) -> CoverageReport:
    nb = len(state.universe)
    nc = len(state.covered)
    nl = len(state.lines_total)
    nh = len(state.lines_hit)
    return CoverageReport(
        branches_total=nb,
        branches_covered=nc,
        branch_pct=_pct(nc, nb),
        lines_total=nl,
        lines_hit=nh,
        line_pct=_pct(nh, nl),
        infeasible=[str(b) for b in sort_branches(state.infeasible)],
    )
