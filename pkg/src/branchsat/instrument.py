"""Penalty injection and the representing function.

Instrumentation is logical: the AST is left alone, and a table records
for every conditional of the target functions the comparison that the
penalty routine will see. The compiled program consults that table at
run time, so the penalty is evaluated on the very operand values the
genuine condition then branches on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple

from .lang.nodes import Cast, Compare, iter_conditionals
from .lang.printer import format_expr, format_program
from .lang.typecheck import TypedProgram
from .runtime import (
    DEFAULT_EPSILON,
    DEFAULT_STEP_BUDGET,
    CompiledProgram,
    ExecutionTrace,
    check_epsilon,
    pen_modes,
)


class InstrumentError(ValueError):
    pass


@dataclass(frozen=True)
class Injection:
    label: int
    function: str
    op: str
    left: object
    right: object

    def describe(self) -> str:
        return f"r = pen(l{self.label}, {self.op}, {format_expr(self.left)}, {format_expr(self.right)});"


def _promote(expr, flag: bool):
    return Cast("double", expr, expr.line, expr.col, "double") if flag else expr


class InstrumentedProgram:
    def __init__(self, base: TypedProgram, targets: FrozenSet[str], table: Dict[int, Injection]):
        self.base = base
        self.targets = targets
        self.table = table
        self.labels: Tuple[int, ...] = tuple(sorted(table))
        self.compiled = CompiledProgram(base, targets)

    @property
    def dim(self) -> int:
        return self.base.input_dim

    def dump(self) -> str:
        """Annotated source: each conditional preceded by its pen call."""
        by_cond = {}
        for fn in self.base.functions:
            if fn.name in self.targets:
                for stmt in iter_conditionals(fn.body):
                    by_cond[id(stmt)] = self.table[stmt.label].describe()
        header = "// instrumented functions: " + ", ".join(sorted(self.targets)) + "\n"
        return header + format_program(self.base.program, lambda s: by_cond.get(id(s)))


def instrument(program: TypedProgram, targets: Optional[Iterable[str]] = None) -> InstrumentedProgram:
    """Record a pen injection before every conditional of each target.

    ``targets`` defaults to the entry function alone; non-target callees
    run unchanged.
    """
    names = {program.entry} if targets is None else set(targets)
    known = {fn.name for fn in program.functions}
    missing = sorted(names - known)
    if missing:
        raise InstrumentError(f"unknown target function(s): {', '.join(missing)}")
    table: Dict[int, Injection] = {}
    for fn in program.functions:
        if fn.name not in names:
            continue
        for stmt in iter_conditionals(fn.body):
            cond: Compare = stmt.cond
            table[stmt.label] = Injection(
                stmt.label,
                fn.name,
                cond.op,
                _promote(cond.left, cond.promote[0]),
                _promote(cond.right, cond.promote[1]),
            )
    return InstrumentedProgram(program, frozenset(names), table)


class Objective:
    """The representing function for one frozen coverage snapshot.

    Calling the object runs the instrumented entry with ``r = 1`` and
    returns the final ``r``; aborted runs give ``+inf``.
    """

    def __init__(self, instrumented: InstrumentedProgram, explored: FrozenSet,
                 eps: float = DEFAULT_EPSILON, step_budget: int = DEFAULT_STEP_BUDGET):
        self.instrumented = instrumented
        self.explored = frozenset(explored)
        self.eps = check_epsilon(eps)
        self.step_budget = int(step_budget)
        self.modes = pen_modes(instrumented.labels, self.explored)
        self.dim = instrumented.dim
        self.evaluations = 0
        self._compiled = instrumented.compiled

    def __call__(self, x: Sequence[float]) -> float:
        if len(x) != self.dim:
            raise ValueError(f"expected input of dimension {self.dim}, got {len(x)}")
        self.evaluations += 1
        value = self._compiled.final_r(x, self.modes, self.eps, self.step_budget)
        return math.inf if value != value else value

    def trace(self, x: Sequence[float]) -> ExecutionTrace:
        return self._compiled.run(x, self.modes, self.eps, self.step_budget)


def make_objective(instrumented: InstrumentedProgram, snapshot, eps: float = DEFAULT_EPSILON,
                   step_budget: int = DEFAULT_STEP_BUDGET) -> Objective:
    universe = getattr(snapshot, "universe", None)
    if universe is not None:
        labels = {b.label for b in universe}
        if labels != set(instrumented.labels):
            raise InstrumentError("snapshot universe does not match the instrumented program")
    return Objective(instrumented, snapshot.explored, eps, step_budget)
