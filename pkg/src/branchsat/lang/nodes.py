"""AST node classes for FPC programs.

Nodes are frozen dataclasses. The parser leaves ``ty`` unset; the type
checker rebuilds the tree with every expression's ``ty`` filled in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

DOUBLE = "double"
INT = "int"
ARRAY = "array"
VOID = "void"

COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class BranchId:
    """One side of one labelled conditional."""

    label: int
    side: bool

    def __str__(self) -> str:
        return f"{self.label}{'T' if self.side else 'F'}"

    @property
    def sort_key(self) -> Tuple[int, int]:
        return (self.label, 0 if self.side else 1)

    @property
    def other(self) -> "BranchId":
        return BranchId(self.label, not self.side)

    @classmethod
    def parse(cls, text: str) -> "BranchId":
        text = text.strip()
        if len(text) < 2 or text[-1] not in "TF" or not text[:-1].isdigit():
            raise ValueError(f"bad branch id {text!r}")
        return cls(int(text[:-1]), text[-1] == "T")


def sort_branches(branches) -> list:
    return sorted(branches, key=lambda b: b.sort_key)


# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: Union[int, float]
    line: int = 0
    col: int = 0
    ty: Optional[str] = None


@dataclass(frozen=True)
class Var:
    name: str
    line: int = 0
    col: int = 0
    ty: Optional[str] = None


@dataclass(frozen=True)
class Index:
    name: str
    index: "Expr"
    line: int = 0
    col: int = 0
    ty: Optional[str] = None


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    line: int = 0
    col: int = 0
    ty: Optional[str] = None


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = 0
    col: int = 0
    ty: Optional[str] = None


@dataclass(frozen=True)
class Cast:
    to: str
    operand: "Expr"
    line: int = 0
    col: int = 0
    ty: Optional[str] = None


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple["Expr", ...]
    line: int = 0
    col: int = 0
    ty: Optional[str] = None


Expr = Union[Num, Var, Index, Unary, Binary, Cast, Call]


@dataclass(frozen=True)
class Compare:
    """The condition of an ``if`` or ``while``: a single comparison.

    ``promote`` flags, set by the type checker, say which operands are
    ints that get widened to double before the penalty is computed.
    """

    op: str
    left: Expr
    right: Expr
    line: int = 0
    col: int = 0
    promote: Tuple[bool, bool] = (False, False)


# -- statements -------------------------------------------------------------


@dataclass(frozen=True)
class Decl:
    type: str
    name: str
    init: Optional[Expr] = None
    line: int = 0


@dataclass(frozen=True)
class Assign:
    target: Union[Var, Index]
    value: Expr
    line: int = 0


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr
    line: int = 0


@dataclass(frozen=True)
class Return:
    value: Optional[Expr] = None
    line: int = 0


@dataclass(frozen=True)
class Block:
    stmts: Tuple["Stmt", ...] = ()
    line: int = 0


@dataclass(frozen=True)
class If:
    label: int
    cond: Compare
    then: "Stmt"
    orelse: Optional["Stmt"] = None
    line: int = 0


@dataclass(frozen=True)
class While:
    label: int
    cond: Compare
    body: "Stmt"
    line: int = 0


Stmt = Union[Decl, Assign, ExprStmt, Return, Block, If, While]


@dataclass(frozen=True)
class Param:
    name: str
    length: Optional[int] = None  # None for a scalar double

    @property
    def width(self) -> int:
        return 1 if self.length is None else self.length


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: Tuple[Param, ...]
    ret_type: str
    body: Block
    line: int = 0

    @property
    def labels(self) -> Tuple[int, ...]:
        return tuple(s.label for s in iter_conditionals(self.body))


@dataclass(frozen=True)
class Program:
    functions: Tuple[FunctionDef, ...]
    entry: str
    source: str = field(default="", repr=False, compare=False)

    def function(self, name: str) -> FunctionDef:
        for fn in self.functions:
            if fn.name == name:
                return fn
        raise KeyError(name)

    @property
    def entry_function(self) -> FunctionDef:
        return self.function(self.entry)

    @property
    def n_conditionals(self) -> int:
        return sum(len(fn.labels) for fn in self.functions)


def iter_statements(stmt):
    """Yield every statement nested in ``stmt`` (pre-order, source order)."""
    yield stmt
    if isinstance(stmt, Block):
        for s in stmt.stmts:
            yield from iter_statements(s)
    elif isinstance(stmt, If):
        yield from iter_statements(stmt.then)
        if stmt.orelse is not None:
            yield from iter_statements(stmt.orelse)
    elif isinstance(stmt, While):
        yield from iter_statements(stmt.body)


def iter_conditionals(stmt):
    for s in iter_statements(stmt):
        if isinstance(s, (If, While)):
            yield s


def iter_subexprs(expr):
    yield expr
    if isinstance(expr, Index):
        yield from iter_subexprs(expr.index)
    elif isinstance(expr, (Unary, Cast)):
        yield from iter_subexprs(expr.operand)
    elif isinstance(expr, Binary):
        yield from iter_subexprs(expr.left)
        yield from iter_subexprs(expr.right)
    elif isinstance(expr, Call):
        for a in expr.args:
            yield from iter_subexprs(a)


def stmt_exprs(stmt):
    """Top-level expressions evaluated by a statement itself (not children)."""
    if isinstance(stmt, Decl):
        return (stmt.init,) if stmt.init is not None else ()
    if isinstance(stmt, Assign):
        return (stmt.target, stmt.value)
    if isinstance(stmt, ExprStmt):
        return (stmt.expr,)
    if isinstance(stmt, Return):
        return (stmt.value,) if stmt.value is not None else ()
    if isinstance(stmt, (If, While)):
        return (stmt.cond.left, stmt.cond.right)
    return ()


def called_names(exprs) -> set:
    names = set()
    for e in exprs:
        for sub in iter_subexprs(e):
            if isinstance(sub, Call):
                names.add(sub.name)
    return names
