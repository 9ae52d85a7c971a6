"""Execution of FPC programs, branch distance and the penalty function.

Programs are compiled once into generated Python functions; every call to
:meth:`CompiledProgram.run` then uses fresh evaluation-local state, so a
compiled program can be shared freely between objectives and threads.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .lang.nodes import (
    DOUBLE,
    INT,
    VOID,
    Assign,
    Binary,
    Block,
    BranchId,
    Call,
    Cast,
    Decl,
    ExprStmt,
    If,
    Index,
    Num,
    Return,
    Unary,
    Var,
    While,
)

DEFAULT_EPSILON = 2.0**-52
DEFAULT_STEP_BUDGET = 10**6
MAX_CALL_DEPTH = 200

INF = math.inf
_TINY = 5e-324  # smallest positive subnormal
INT_MIN = -(2**31)

_OPPOSITE = {"<=": ">", ">": "<=", "<": ">=", ">=": "<", "==": "!=", "!=": "=="}

# pen dispatch modes, precomputed per label from a coverage snapshot
PEN_ZERO, PEN_TRUE, PEN_FALSE, PEN_KEEP = 0, 1, 2, 3

ABORT_STEPS = "step-budget"
ABORT_ERROR = "runtime-error"


class RuntimeFault(Exception):
    """Division by zero, domain error or similar during execution."""


class StepBudgetExceeded(Exception):
    pass


def check_epsilon(eps: float) -> float:
    eps = float(eps)
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError(f"epsilon must be positive and finite, got {eps!r}")
    return eps


def opposite(op: str) -> str:
    """Logical negation of a comparison operator."""
    return _OPPOSITE[op]


def _square(diff: float) -> float:
    if diff != diff:  # inf - inf with equal operands
        return 0.0
    sq = diff * diff
    if sq == 0.0 and diff != 0.0:
        # keep the distance strictly positive when the square underflows
        return _TINY
    return sq


def branch_distance(op: str, a: float, b: float, eps: float = DEFAULT_EPSILON) -> float:
    """Non-negative distance from ``a op b`` holding; zero exactly when it holds.

    NaN operands give +inf.
    """
    a = float(a)
    b = float(b)
    if a != a or b != b:
        return INF
    if op == ">=":
        op, a, b = "<=", b, a
    elif op == ">":
        op, a, b = "<", b, a
    if op == "==":
        return 0.0 if a == b else _square(a - b)
    if op == "<=":
        return 0.0 if a <= b else _square(a - b)
    if op == "<":
        return 0.0 if a < b else _square(a - b) + eps
    if op == "!=":
        return 0.0 if a != b else eps
    raise ValueError(f"unknown comparison {op!r}")


def pen_mode(label: int, explored) -> int:
    t = BranchId(label, True) in explored
    f = BranchId(label, False) in explored
    if not t and not f:
        return PEN_ZERO
    if not t:
        return PEN_TRUE
    if not f:
        return PEN_FALSE
    return PEN_KEEP


def pen_modes(labels: Iterable[int], explored) -> Dict[int, int]:
    return {label: pen_mode(label, explored) for label in labels}


def pen(label: int, op: str, a: float, b: float, snapshot, r: float,
        eps: float = DEFAULT_EPSILON) -> float:
    """Penalty for conditional ``label``; ``snapshot`` exposes ``explored``."""
    explored = snapshot.explored if hasattr(snapshot, "explored") else snapshot
    mode = pen_mode(label, explored)
    if mode == PEN_ZERO:
        return 0.0
    if mode == PEN_TRUE:
        return branch_distance(op, a, b, eps)
    if mode == PEN_FALSE:
        return branch_distance(opposite(op), a, b, eps)
    return r


@dataclass(frozen=True)
class ExecutionTrace:
    taken: Tuple[BranchId, ...]
    final_r: float
    returned: Optional[float] = None
    aborted: Optional[str] = None
    lines: FrozenSet[int] = frozenset()
    error: Optional[str] = None

    @property
    def branches(self) -> FrozenSet[BranchId]:
        return frozenset(self.taken)


# -- value helpers ------------------------------------------------------------

_DOUBLE = struct.Struct("<d")
_QWORD = struct.Struct("<Q")


def _wrap32(v: int) -> int:
    return ((v + 0x80000000) & 0xFFFFFFFF) - 0x80000000


def to_int(v) -> int:
    """C-style ``(int)`` conversion; NaN and out-of-range give INT_MIN (as on x86)."""
    if isinstance(v, int):
        return v
    if v != v or v >= 2147483648.0 or v <= -2147483649.0:
        return INT_MIN
    return int(v)


def _bits(x: float) -> int:
    return _QWORD.unpack(_DOUBLE.pack(x))[0]


def _from_bits(bits: int) -> float:
    return _DOUBLE.unpack(_QWORD.pack(bits & 0xFFFFFFFFFFFFFFFF))[0]


def highword(x) -> int:
    return _wrap32(_bits(float(x)) >> 32)


def lowword(x) -> int:
    return _wrap32(_bits(float(x)) & 0xFFFFFFFF)


def with_highword(x, hi: int) -> float:
    return _from_bits(((hi & 0xFFFFFFFF) << 32) | (_bits(float(x)) & 0xFFFFFFFF))


def with_lowword(x, lo: int) -> float:
    return _from_bits((_bits(float(x)) & 0xFFFFFFFF00000000) | (lo & 0xFFFFFFFF))


def _sqrt(x):
    x = float(x)
    if x < 0:
        raise RuntimeFault("sqrt of negative number")
    return math.sqrt(x)


def _log(x):
    x = float(x)
    if x <= 0:
        raise RuntimeFault("log of non-positive number")
    return math.log(x)


def _log1p(x):
    x = float(x)
    if x <= -1:
        raise RuntimeFault("log1p of number <= -1")
    return math.log1p(x)


def _guard(fn):
    def call(*args):
        try:
            return fn(*(float(a) for a in args))
        except OverflowError:
            return INF
        except ValueError:
            return math.nan

    return call


def _rounding(fn):
    def call(x):
        x = float(x)
        return float(fn(x)) if math.isfinite(x) else x

    return call


def _pow(x, y):
    try:
        return math.pow(float(x), float(y))
    except OverflowError:
        return INF
    except ValueError:
        return math.nan


BUILTIN_IMPLS = {
    "sqrt": _sqrt,
    "fabs": lambda x: math.fabs(x),
    "sin": _guard(math.sin),
    "cos": _guard(math.cos),
    "tan": _guard(math.tan),
    "atan": _guard(math.atan),
    "exp": _guard(math.exp),
    "expm1": _guard(math.expm1),
    "log": _log,
    "log1p": _log1p,
    "floor": _rounding(math.floor),
    "ceil": _rounding(math.ceil),
    "pow": _pow,
    "highword": highword,
    "lowword": lowword,
    "with_highword": with_highword,
    "with_lowword": with_lowword,
}


def _int_div(a: int, b: int) -> int:
    if b == 0:
        raise RuntimeFault("integer division by zero")
    q = abs(a) // abs(b)
    return _wrap32(q if (a < 0) == (b < 0) else -q)


def _int_mod(a: int, b: int) -> int:
    if b == 0:
        raise RuntimeFault("integer modulo by zero")
    return a - _int_div(a, b) * b


def _float_div(a, b):
    if b == 0:
        raise RuntimeFault("division by zero")
    return a / b


# -- compilation --------------------------------------------------------------
#
# Each FPC function becomes one generated Python function. Locals live in
# Python locals (one per declaration slot, so shadowing is resolved at
# compile time); ``r``, the step counter, the trace and the call depth live
# in a per-run context object.


class _Ctx:
    __slots__ = ("r", "taken", "lines", "steps", "budget", "modes", "eps", "depth")

    def __init__(self, modes, eps, budget, track_lines):
        self.r = 1.0
        self.taken: List[BranchId] = []
        self.lines = set() if track_lines else None
        self.steps = 0
        self.budget = budget
        self.modes = modes
        self.eps = eps
        self.depth = 0


def _index(arr, i):
    if not 0 <= i < len(arr):
        raise RuntimeFault(f"index {i} out of bounds")
    return i


def _budget_exceeded():
    raise StepBudgetExceeded()


def _fell_off(name):
    raise RuntimeFault(f"function {name} ended without returning a value")


def _too_deep():
    raise RuntimeFault("call depth exceeded")


_RUNTIME_NAMES = {
    "_w32": _wrap32,
    "_toint": to_int,
    "_idiv": _int_div,
    "_imod": _int_mod,
    "_fdiv": _float_div,
    "_idx": _index,
    "_bd": branch_distance,
    "_over": _budget_exceeded,
    "_falloff": _fell_off,
    "_deep": _too_deep,
    "_MAXD": MAX_CALL_DEPTH,
    "float": float,
}

_FLOAT_OPS = {"+", "-", "*"}


class _FunctionCodegen:
    """Emit Python source for one FPC function."""

    def __init__(self, fn, injected: bool, tracked: bool, branch_names: Dict[BranchId, str]):
        self.fn = fn
        self.injected = injected
        self.tracked = tracked
        self.branch_names = branch_names
        self.lines_out: List[str] = []
        self.nslots = 0
        self.scopes: List[Dict[str, Tuple[str, str]]] = [{}]

    # -- helpers -----------------------------------------------------------

    def slot(self, name: str, ty: str) -> str:
        var = f"s{self.nslots}"
        self.nslots += 1
        self.scopes[-1][name] = (var, ty)
        return var

    def lookup(self, name: str) -> Tuple[str, str]:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise KeyError(name)

    def emit(self, depth: int, text: str) -> None:
        self.lines_out.append("    " * depth + text)

    def tick(self, depth: int, line: int) -> None:
        self.emit(depth, "ctx.steps += 1")
        self.emit(depth, "if ctx.steps > _B: _over()")
        if self.tracked:
            self.emit(depth, f"if _L is not None: _L.add({line})")

    # -- functions ---------------------------------------------------------

    def source(self) -> str:
        fn = self.fn
        params = [self.slot(p.name, DOUBLE if p.length is None else "array") for p in fn.params]
        self.emit(0, f"def f_{fn.name}({', '.join(params + ['ctx'])}):")
        self.emit(1, "ctx.depth += 1")
        self.emit(1, "if ctx.depth > _MAXD: _deep()")
        self.emit(1, "_B = ctx.budget")
        if self.tracked:
            self.emit(1, "_L = ctx.lines")
            self.emit(1, "_T = ctx.taken.append")
        if self.injected:
            self.emit(1, "_M = ctx.modes")
        self.block(fn.body, 1)
        if fn.ret_type == VOID:
            self.emit(1, "ctx.depth -= 1")
            self.emit(1, "return None")
        else:
            self.emit(1, f"_falloff({fn.name!r})")
        return "\n".join(self.lines_out) + "\n"

    # -- statements --------------------------------------------------------

    def block(self, b, depth: int) -> None:
        self.scopes.append({})
        before = len(self.lines_out)
        for st in b.stmts:
            self.stmt(st, depth)
        if len(self.lines_out) == before:
            self.emit(depth, "pass")
        self.scopes.pop()

    def body(self, st, depth: int) -> None:
        if isinstance(st, Block):
            self.block(st, depth)
        else:
            before = len(self.lines_out)
            self.stmt(st, depth)
            if len(self.lines_out) == before:
                self.emit(depth, "pass")

    def stmt(self, st, depth: int) -> None:
        getattr(self, "stmt_" + type(st).__name__)(st, depth)

    def stmt_Block(self, st: Block, depth: int) -> None:
        self.block(st, depth)

    def _store(self, expr, ty: str) -> str:
        code = self.expr(expr)
        if ty == INT:
            return code if expr.ty == INT else f"_toint({code})"
        return code if expr.ty == DOUBLE else f"float({code})"

    def stmt_Decl(self, st: Decl, depth: int) -> None:
        self.tick(depth, st.line)
        init = self._store(st.init, st.type) if st.init is not None else ("0" if st.type == INT else "0.0")
        var = self.slot(st.name, st.type)
        self.emit(depth, f"{var} = {init}")

    def stmt_Assign(self, st: Assign, depth: int) -> None:
        self.tick(depth, st.line)
        target = st.target
        var, ty = self.lookup(target.name)
        if isinstance(target, Var):
            self.emit(depth, f"{var} = {self._store(st.value, ty)}")
            return
        self.emit(depth, f"_i = {self.expr(target.index)}")
        self.emit(depth, f"_v = {self._store(st.value, DOUBLE)}")
        self.emit(depth, f"{var}[_idx({var}, _i)] = _v")

    def stmt_ExprStmt(self, st: ExprStmt, depth: int) -> None:
        self.tick(depth, st.line)
        self.emit(depth, self.expr(st.expr))

    def stmt_Return(self, st: Return, depth: int) -> None:
        self.tick(depth, st.line)
        if st.value is None:
            self.emit(depth, "ctx.depth -= 1")
            self.emit(depth, "return None")
            return
        code = self.expr(st.value)
        if st.value.ty == INT:
            code = f"float({code})"
        self.emit(depth, f"_v = {code}")
        self.emit(depth, "ctx.depth -= 1")
        self.emit(depth, "return _v")

    def condition(self, st, depth: int) -> None:
        """Emit the test of ``st`` into ``_c``: penalty first, then the branch."""
        self.tick(depth, st.line)
        cond = st.cond
        left, right = self.expr(cond.left), self.expr(cond.right)
        pl, pr = cond.promote
        self.emit(depth, f"_a = {'float(' + left + ')' if pl else left}")
        self.emit(depth, f"_b = {'float(' + right + ')' if pr else right}")
        label = st.label
        if self.injected:
            op, opp = cond.op, _OPPOSITE[cond.op]
            self.emit(depth, "if _M is not None:")
            self.emit(depth + 1, f"_m = _M[{label}]")
            self.emit(depth + 1, "if _m == 0: ctx.r = 0.0")
            self.emit(depth + 1, f"elif _m == 1: ctx.r = _bd({op!r}, _a, _b, ctx.eps)")
            self.emit(depth + 1, f"elif _m == 2: ctx.r = _bd({opp!r}, _a, _b, ctx.eps)")
        self.emit(depth, f"_c = _a {cond.op} _b")
        if self.tracked:
            t_name = self.branch_names[BranchId(label, True)]
            f_name = self.branch_names[BranchId(label, False)]
            self.emit(depth, f"_T({t_name} if _c else {f_name})")

    def stmt_If(self, st: If, depth: int) -> None:
        self.condition(st, depth)
        self.emit(depth, "if _c:")
        self.body(st.then, depth + 1)
        if st.orelse is not None:
            self.emit(depth, "else:")
            self.body(st.orelse, depth + 1)

    def stmt_While(self, st: While, depth: int) -> None:
        self.emit(depth, "while True:")
        self.condition(st, depth + 1)
        self.emit(depth + 1, "if not _c: break")
        self.body(st.body, depth + 1)

    # -- expressions -------------------------------------------------------

    def expr(self, e) -> str:
        return getattr(self, "expr_" + type(e).__name__)(e)

    def expr_Num(self, e: Num) -> str:
        value = e.value if e.ty == INT else float(e.value)
        return f"({value!r})"

    def expr_Var(self, e: Var) -> str:
        return self.lookup(e.name)[0]

    def expr_Index(self, e: Index) -> str:
        var, _ = self.lookup(e.name)
        return f"{var}[_idx({var}, {self.expr(e.index)})]"

    def expr_Unary(self, e: Unary) -> str:
        inner = self.expr(e.operand)
        if e.op == "~":
            return f"(~{inner})"
        if e.ty == INT:
            return f"_w32(-{inner})"
        return f"(-{inner})"

    def expr_Binary(self, e: Binary) -> str:
        a, b = self.expr(e.left), self.expr(e.right)
        op = e.op
        if e.ty != INT:
            if op in _FLOAT_OPS:
                return f"({a} {op} {b})"
            return f"_fdiv({a}, {b})"
        if op in ("+", "-", "*"):
            return f"_w32({a} {op} {b})"
        if op == "/":
            return f"_idiv({a}, {b})"
        if op == "%":
            return f"_imod({a}, {b})"
        if op in ("&", "|", "^"):
            return f"({a} {op} {b})"
        if op == "<<":
            return f"_w32({a} << ({b} & 31))"
        return f"({a} >> ({b} & 31))"

    def expr_Cast(self, e: Cast) -> str:
        inner = self.expr(e.operand)
        if e.to == INT:
            return inner if e.operand.ty == INT else f"_toint({inner})"
        return inner if e.operand.ty == DOUBLE else f"float({inner})"

    def expr_Call(self, e: Call) -> str:
        if e.name in BUILTIN_IMPLS:
            args = ", ".join(self.expr(a) for a in e.args)
            return f"_bi_{e.name}({args})"
        args = []
        for a in e.args:
            code = self.expr(a)
            args.append(f"float({code})" if a.ty == INT else code)
        return f"f_{e.name}({', '.join(args + ['ctx'])})"


def _compile_functions(program, injected: FrozenSet[str], tracked: FrozenSet[str]) -> Tuple[Dict, str]:
    """Generate, compile and return ``{name: python function}`` plus the source."""
    branch_names: Dict[BranchId, str] = {}
    namespace: Dict[str, object] = dict(_RUNTIME_NAMES)
    for name, impl in BUILTIN_IMPLS.items():
        namespace[f"_bi_{name}"] = impl
    chunks = []
    for fn in program.functions:
        if fn.name in tracked:
            for label in fn.labels:
                for side in (True, False):
                    b = BranchId(label, side)
                    var = f"_br{label}{'T' if side else 'F'}"
                    branch_names[b] = var
                    namespace[var] = b
        chunks.append(_FunctionCodegen(fn, fn.name in injected, fn.name in tracked, branch_names).source())
    source = "\n".join(chunks)
    exec(compile(source, f"<fpc:{program.entry}>", "exec"), namespace)
    return {fn.name: namespace[f"f_{fn.name}"] for fn in program.functions}, source


class CompiledProgram:
    """A typed program compiled for fast repeated execution.

    ``injected`` names the functions whose conditionals evaluate the
    penalty before branching; ``tracked`` names the functions whose
    branches and lines are recorded in traces.
    """

    def __init__(self, typed, injected: Iterable[str] = (), tracked: Optional[Iterable[str]] = None):
        self.typed = typed
        self.program = typed.program
        self.injected = frozenset(injected)
        self.tracked = frozenset(self.injected if tracked is None else tracked)
        self.functions, self.source = _compile_functions(self.program, self.injected, self.tracked)
        entry = self.program.entry_function
        self.entry = self.functions[entry.name]
        self.params = entry.params
        self.dim = typed.input_dim

    def unflatten(self, x: Sequence[float]) -> list:
        if len(x) != self.dim:
            raise ValueError(f"expected input of dimension {self.dim}, got {len(x)}")
        args = []
        i = 0
        for p in self.params:
            if p.length is None:
                args.append(float(x[i]))
                i += 1
            else:
                args.append([float(v) for v in x[i:i + p.length]])
                i += p.length
        return args

    def run(self, x: Sequence[float], modes: Optional[Mapping[int, int]] = None,
            eps: float = DEFAULT_EPSILON, step_budget: int = DEFAULT_STEP_BUDGET,
            track_lines: bool = True) -> ExecutionTrace:
        args = self.unflatten(x)
        ctx = _Ctx(modes, eps, step_budget, track_lines)
        returned = None
        aborted = None
        error = None
        try:
            returned = self.entry(*args, ctx)
        except StepBudgetExceeded:
            aborted, error = ABORT_STEPS, "step budget exceeded"
        except (RuntimeFault, RecursionError) as exc:
            aborted, error = ABORT_ERROR, str(exc) or type(exc).__name__
        final_r = INF if aborted else ctx.r
        lines = frozenset(ctx.lines) if ctx.lines is not None else frozenset()
        return ExecutionTrace(tuple(ctx.taken), final_r, returned, aborted, lines, error)

    def final_r(self, x: Sequence[float], modes: Mapping[int, int], eps: float,
                step_budget: int) -> float:
        """Fast path for objective evaluation: no trace object, no line tracking."""
        args = self.unflatten(x)
        ctx = _Ctx(modes, eps, step_budget, False)
        try:
            self.entry(*args, ctx)
        except (StepBudgetExceeded, RuntimeFault, RecursionError):
            return INF
        return ctx.r


def execute(instrumented, x: Sequence[float], snapshot, eps: float = DEFAULT_EPSILON,
            step_budget: int = DEFAULT_STEP_BUDGET) -> ExecutionTrace:
    """Run the instrumented entry on ``x`` with ``r`` starting at 1."""
    modes = pen_modes(instrumented.labels, snapshot.explored)
    return instrumented.compiled.run(x, modes, check_epsilon(eps), step_budget)


def run_uninstrumented(typed, x: Sequence[float], tracked: Optional[Iterable[str]] = None,
                       step_budget: int = DEFAULT_STEP_BUDGET) -> ExecutionTrace:
    """Plain execution; records branches of ``tracked`` (default: the entry)."""
    tracked = (typed.entry,) if tracked is None else tracked
    return CompiledProgram(typed, (), tracked).run(x, None, DEFAULT_EPSILON, step_budget)


def evaluate_objective(objective, x: Sequence[float]) -> float:
    return objective(x)
