"""Control-flow graphs with branch-labelled edges.

Nodes are arbitrary hashable values. An edge leaving a conditional carries
the :class:`BranchId` it represents; all other edges carry ``None``.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Dict, FrozenSet, Hashable, Iterable, List, Optional, Tuple

from .nodes import (
    Assign,
    Block,
    BranchId,
    Decl,
    ExprStmt,
    FunctionDef,
    If,
    Program,
    Return,
    While,
    called_names,
    sort_branches,
    stmt_exprs,
)

Edge = Tuple[Hashable, Hashable, Optional[BranchId]]


class CFG:
    def __init__(self, entry: Hashable, exit: Hashable, edges: Iterable[Edge], nodes=()):
        self.entry = entry
        self.exit = exit
        self.edges: Tuple[Edge, ...] = tuple(edges)
        self.nodes = {entry, exit, *nodes}
        self.succ: Dict[Hashable, List[Tuple[Hashable, Optional[BranchId]]]] = defaultdict(list)
        self.branch_edges: Dict[BranchId, Tuple[Hashable, Hashable]] = {}
        for src, dst, branch in self.edges:
            self.nodes.update((src, dst))
            self.succ[src].append((dst, branch))
            if branch is not None:
                if branch in self.branch_edges:
                    raise ValueError(f"branch {branch} labels more than one edge")
                self.branch_edges[branch] = (src, dst)
        self._descendants: Dict[BranchId, FrozenSet[BranchId]] = {}

    def branches(self) -> List[BranchId]:
        return sort_branches(self.branch_edges)

    def reachable(self, start: Optional[Hashable] = None) -> set:
        start = self.entry if start is None else start
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for dst, _ in self.succ.get(node, ()):
                if dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        return seen

    def descendants(self, branch: BranchId, blocked: FrozenSet[BranchId] = frozenset()) -> FrozenSet[BranchId]:
        """Branches reachable along paths that begin by taking ``branch``.

        A branch is never its own descendant, even when a loop makes it
        reachable from itself. Edges in ``blocked`` are reported but not
        followed, so whatever lies only behind them is left out.
        """
        key = (branch, blocked)
        cached = self._descendants.get(key)
        if cached is not None:
            return cached
        try:
            _, first = self.branch_edges[branch]
        except KeyError:
            raise KeyError(f"unknown branch {branch}") from None
        seen = {first}
        stack = [first]
        found = set()
        while stack:
            node = stack.pop()
            for dst, label in self.succ.get(node, ()):
                if label is not None:
                    found.add(label)
                    if label in blocked:
                        continue
                if dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        found.discard(branch)
        result = frozenset(found)
        self._descendants[key] = result
        return result


class FunctionGraph:
    """CFG of one function plus per-node bookkeeping used by the frontend."""

    def __init__(self, fn: FunctionDef):
        self.fn = fn
        self._count = 0
        self._edges: List[Edge] = []
        self.stmt_of: Dict[Hashable, object] = {}
        self.calls: Dict[Hashable, set] = {}
        self.entry = self._new()
        self.exit = self._new()
        tail = self._build(fn.body, [(self.entry, None)])
        self._connect(tail, self.exit)
        self.cfg = CFG(self.entry, self.exit, self._edges, self.stmt_of.keys())

    def _new(self, stmt=None):
        node = (self.fn.name, self._count)
        self._count += 1
        if stmt is not None:
            self.stmt_of[node] = stmt
            names = called_names(e for e in stmt_exprs(stmt) if e is not None)
            if names:
                self.calls[node] = names
        return node

    def _connect(self, pending, node):
        for src, branch in pending:
            self._edges.append((src, node, branch))

    def _build(self, stmt, pending):
        if isinstance(stmt, Block):
            for s in stmt.stmts:
                pending = self._build(s, pending)
            return pending
        if isinstance(stmt, (Decl, Assign, ExprStmt)):
            node = self._new(stmt)
            self._connect(pending, node)
            return [(node, None)]
        if isinstance(stmt, Return):
            node = self._new(stmt)
            self._connect(pending, node)
            self._edges.append((node, self.exit, None))
            return []
        if isinstance(stmt, If):
            # operand evaluation gets its own node so calls inside the
            # condition complete before the branch is taken
            pre = self._new(stmt)
            self._connect(pending, pre)
            test = self._new()
            self._edges.append((pre, test, None))
            out = self._build(stmt.then, [(test, BranchId(stmt.label, True))])
            if stmt.orelse is not None:
                out = out + self._build(stmt.orelse, [(test, BranchId(stmt.label, False))])
            else:
                out = out + [(test, BranchId(stmt.label, False))]
            return out
        if isinstance(stmt, While):
            pre = self._new(stmt)
            self._connect(pending, pre)
            test = self._new()
            self._edges.append((pre, test, None))
            body_out = self._build(stmt.body, [(test, BranchId(stmt.label, True))])
            self._connect(body_out, pre)
            return [(test, BranchId(stmt.label, False))]
        raise TypeError(f"unexpected statement {stmt!r}")

    def unreachable_statements(self) -> list:
        live = self.cfg.reachable()
        dead = [s for node, s in self.stmt_of.items() if node not in live]
        return sorted(dead, key=lambda s: s.line)


def build_cfg(fn: FunctionDef) -> CFG:
    """Intra-procedural CFG of ``fn``; while back edges included."""
    return FunctionGraph(fn).cfg


class ProgramCFG:
    """Interprocedural branch reachability over every function of a program.

    Calls are summarized on the way down: reaching a call node makes every
    branch of the callee (and of its callees) a descendant. Returns are
    followed on the way up only, from a function's exit to the successors
    of each of its call sites. This avoids the spurious cycles a plain
    supergraph creates when one helper is called from several places.
    """

    def __init__(self, program: Program):
        self.program = program
        self.graphs = {fn.name: FunctionGraph(fn) for fn in program.functions}
        self.branch_edges: Dict[BranchId, Tuple[Hashable, Hashable]] = {}
        self.owner: Dict[BranchId, str] = {}
        self.call_sites: Dict[str, List[Tuple[str, Hashable]]] = defaultdict(list)
        for name, g in self.graphs.items():
            for b, edge in g.cfg.branch_edges.items():
                self.branch_edges[b] = edge
                self.owner[b] = name
            for node, callees in g.calls.items():
                for callee in sorted(callees):
                    if callee in self.graphs:
                        self.call_sites[callee].append((name, node))
        self._summary: Dict[str, FrozenSet[BranchId]] = {}
        self._descendants: Dict[BranchId, FrozenSet[BranchId]] = {}

    def branches(self) -> List[BranchId]:
        return sort_branches(self.branch_edges)

    def _callee_branches(self, name: str) -> FrozenSet[BranchId]:
        cached = self._summary.get(name)
        if cached is not None:
            return cached
        seen = {name}
        stack = [name]
        found = set()
        while stack:
            g = self.graphs[stack.pop()]
            found.update(g.cfg.branch_edges)
            for callees in g.calls.values():
                for callee in callees:
                    if callee in self.graphs and callee not in seen:
                        seen.add(callee)
                        stack.append(callee)
        result = frozenset(found)
        self._summary[name] = result
        return result

    def descendants(self, branch: BranchId, blocked: FrozenSet[BranchId] = frozenset()) -> FrozenSet[BranchId]:
        """Like :meth:`CFG.descendants`, across calls and returns.

        With ``blocked`` branches, callees are walked edge by edge instead
        of being summarized, so that a blocked edge inside a callee hides
        what lies behind it.
        """
        key = (branch, blocked)
        cached = self._descendants.get(key)
        if cached is not None:
            return cached
        try:
            _, first = self.branch_edges[branch]
        except KeyError:
            raise KeyError(f"unknown branch {branch}") from None
        found = set()
        seen = set()
        returned = set()
        # (function, node, may_return): only the branch's own function and the
        # callers reached by returning from it continue past their exit
        work = [(self.owner[branch], first, True)]
        while work:
            fname, node, up = work.pop()
            if (fname, node, up) in seen:
                continue
            seen.add((fname, node, up))
            g = self.graphs[fname]
            for callee in g.calls.get(node, ()):
                if callee not in self.graphs:
                    continue
                if blocked:
                    work.append((callee, self.graphs[callee].cfg.entry, False))
                else:
                    found |= self._callee_branches(callee)
            if up and node == g.exit and fname not in returned:
                returned.add(fname)
                for caller, site in self.call_sites.get(fname, ()):
                    for dst, label in self.graphs[caller].cfg.succ.get(site, ()):
                        if label is None:
                            work.append((caller, dst, True))
            for dst, label in g.cfg.succ.get(node, ()):
                if label is not None:
                    found.add(label)
                    if label in blocked:
                        continue
                work.append((fname, dst, up))
        found.discard(branch)
        result = frozenset(found)
        self._descendants[key] = result
        return result


def build_program_cfg(program: Program) -> ProgramCFG:
    return ProgramCFG(program)


def list_branches(fn: FunctionDef) -> List[BranchId]:
    """Branches of ``fn`` in source order: 0T, 0F, 1T, 1F, ..."""
    out = []
    for label in fn.labels:
        out.extend((BranchId(label, True), BranchId(label, False)))
    return out


def descendants(cfg: CFG, branch: BranchId, blocked: FrozenSet[BranchId] = frozenset()) -> FrozenSet[BranchId]:
    return cfg.descendants(branch, frozenset(blocked))
