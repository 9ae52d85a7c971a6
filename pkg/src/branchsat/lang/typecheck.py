"""Static checks for FPC programs.

The checker rebuilds the AST with expression types filled in, marks int
comparands for promotion to double, rejects unreachable code and computes
the flattened input dimension of the entry function.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

from .cfg import FunctionGraph
from .nodes import (
    ARRAY,
    DOUBLE,
    INT,
    VOID,
    Assign,
    Binary,
    Block,
    Call,
    Cast,
    Compare,
    Decl,
    ExprStmt,
    FunctionDef,
    If,
    Index,
    Num,
    Program,
    Return,
    Unary,
    Var,
    While,
)
from .parser import FpcError


class FpcTypeError(FpcError):
    pass


# name -> (argument types, result type); 'num' accepts int or double
BUILTINS: Dict[str, Tuple[Tuple[str, ...], str]] = {
    "sqrt": (("num",), DOUBLE),
    "fabs": (("num",), DOUBLE),
    "sin": (("num",), DOUBLE),
    "cos": (("num",), DOUBLE),
    "tan": (("num",), DOUBLE),
    "atan": (("num",), DOUBLE),
    "exp": (("num",), DOUBLE),
    "expm1": (("num",), DOUBLE),
    "log": (("num",), DOUBLE),
    "log1p": (("num",), DOUBLE),
    "floor": (("num",), DOUBLE),
    "ceil": (("num",), DOUBLE),
    "pow": (("num", "num"), DOUBLE),
    "highword": (("num",), INT),
    "lowword": (("num",), INT),
    "with_highword": (("num", INT), DOUBLE),
    "with_lowword": (("num", INT), DOUBLE),
}

INT_ONLY_OPS = {"%", "&", "|", "^", "<<", ">>"}


@dataclass(frozen=True)
class TypedProgram:
    program: Program
    input_dim: int

    @property
    def entry(self) -> str:
        return self.program.entry

    @property
    def functions(self):
        return self.program.functions

    def function(self, name: str) -> FunctionDef:
        return self.program.function(name)


class _Scope:
    def __init__(self, parent: Optional["_Scope"] = None):
        self.parent = parent
        self.vars: Dict[str, Tuple[str, Optional[int]]] = {}

    def lookup(self, name):
        scope = self
        while scope is not None:
            if name in scope.vars:
                return scope.vars[name]
            scope = scope.parent
        return None


class _Checker:
    def __init__(self, program: Program):
        self.program = program
        self.functions = {fn.name: fn for fn in program.functions}
        self.current: Optional[FunctionDef] = None

    def fail(self, message, node) -> FpcTypeError:
        return FpcTypeError(message, getattr(node, "line", 0), getattr(node, "col", 0))

    # -- functions -------------------------------------------------------

    def check_function(self, fn: FunctionDef) -> FunctionDef:
        self.current = fn
        if fn.name in BUILTINS:
            raise FpcTypeError(f"function {fn.name!r} shadows a builtin", fn.line)
        scope = _Scope()
        for p in fn.params:
            scope.vars[p.name] = (ARRAY, p.length) if p.length is not None else (DOUBLE, None)
        body = self.check_block(fn.body, _Scope(scope))
        checked = replace(fn, body=body)
        dead = FunctionGraph(checked).unreachable_statements()
        if dead:
            raise FpcTypeError(f"unreachable code in function {fn.name!r}", dead[0].line)
        return checked

    # -- statements ------------------------------------------------------

    def check_block(self, block: Block, scope: _Scope) -> Block:
        return replace(block, stmts=tuple(self.check_stmt(s, scope) for s in block.stmts))

    def check_stmt(self, stmt, scope: _Scope):
        if isinstance(stmt, Block):
            return self.check_block(stmt, _Scope(scope))
        if isinstance(stmt, Decl):
            if stmt.name in scope.vars:
                raise self.fail(f"redeclaration of {stmt.name!r}", stmt)
            init = None
            if stmt.init is not None:
                init = self.scalar(self.expr(stmt.init, scope), "initializer")
            scope.vars[stmt.name] = (stmt.type, None)
            return replace(stmt, init=init)
        if isinstance(stmt, Assign):
            target = self.expr(stmt.target, scope)
            if target.ty == ARRAY:
                raise self.fail("cannot assign to a whole array", stmt)
            value = self.scalar(self.expr(stmt.value, scope), "assigned value")
            return replace(stmt, target=target, value=value)
        if isinstance(stmt, ExprStmt):
            return replace(stmt, expr=self.expr(stmt.expr, scope, allow_void=True))
        if isinstance(stmt, Return):
            fn = self.current
            if stmt.value is None:
                if fn.ret_type != VOID:
                    raise self.fail(f"function {fn.name!r} must return a value", stmt)
                return stmt
            if fn.ret_type == VOID:
                raise self.fail(f"void function {fn.name!r} returns a value", stmt)
            return replace(stmt, value=self.scalar(self.expr(stmt.value, scope), "return value"))
        if isinstance(stmt, If):
            cond = self.condition(stmt.cond, scope)
            then = self.check_stmt(stmt.then, _Scope(scope))
            orelse = None if stmt.orelse is None else self.check_stmt(stmt.orelse, _Scope(scope))
            return replace(stmt, cond=cond, then=then, orelse=orelse)
        if isinstance(stmt, While):
            cond = self.condition(stmt.cond, scope)
            return replace(stmt, cond=cond, body=self.check_stmt(stmt.body, _Scope(scope)))
        raise TypeError(stmt)

    def condition(self, cond: Compare, scope: _Scope) -> Compare:
        left = self.expr(cond.left, scope)
        right = self.expr(cond.right, scope)
        for side in (left, right):
            if side.ty not in (INT, DOUBLE):
                raise self.fail(f"unsupported comparison on {side.ty} operand", cond)
        return replace(cond, left=left, right=right, promote=(left.ty == INT, right.ty == INT))

    # -- expressions -----------------------------------------------------

    def scalar(self, expr, what):
        if expr.ty not in (INT, DOUBLE):
            raise self.fail(f"{what} must be a scalar, not {expr.ty}", expr)
        return expr

    def expr(self, e, scope: _Scope, allow_void: bool = False):
        if isinstance(e, Num):
            return replace(e, ty=INT if isinstance(e.value, int) else DOUBLE)
        if isinstance(e, Var):
            info = scope.lookup(e.name)
            if info is None:
                raise self.fail(f"undeclared variable {e.name!r}", e)
            return replace(e, ty=info[0])
        if isinstance(e, Index):
            info = scope.lookup(e.name)
            if info is None:
                raise self.fail(f"undeclared variable {e.name!r}", e)
            if info[0] != ARRAY:
                raise self.fail(f"{e.name!r} is not an array", e)
            index = self.expr(e.index, scope)
            if index.ty != INT:
                raise self.fail("array index must be an int", e)
            return replace(e, index=index, ty=DOUBLE)
        if isinstance(e, Unary):
            operand = self.scalar(self.expr(e.operand, scope), "operand")
            if e.op == "~" and operand.ty != INT:
                raise self.fail("type mismatch: '~' needs an int operand", e)
            return replace(e, operand=operand, ty=operand.ty)
        if isinstance(e, Binary):
            left = self.scalar(self.expr(e.left, scope), "operand")
            right = self.scalar(self.expr(e.right, scope), "operand")
            if e.op in INT_ONLY_OPS:
                if left.ty != INT or right.ty != INT:
                    raise self.fail(f"type mismatch: {e.op!r} needs int operands", e)
                ty = INT
            else:
                ty = INT if left.ty == INT and right.ty == INT else DOUBLE
            return replace(e, left=left, right=right, ty=ty)
        if isinstance(e, Cast):
            operand = self.scalar(self.expr(e.operand, scope), "cast operand")
            return replace(e, operand=operand, ty=e.to)
        if isinstance(e, Call):
            return self.call(e, scope, allow_void)
        raise TypeError(e)

    def call(self, e: Call, scope: _Scope, allow_void: bool):
        args = tuple(self.expr(a, scope) for a in e.args)
        if e.name in BUILTINS:
            params, result = BUILTINS[e.name]
            if len(args) != len(params):
                raise self.fail(f"{e.name} expects {len(params)} argument(s)", e)
            for arg, want in zip(args, params):
                if want == "num" and arg.ty not in (INT, DOUBLE):
                    raise self.fail(f"type mismatch in call to {e.name}", arg)
                if want == INT and arg.ty != INT:
                    raise self.fail(f"type mismatch: {e.name} needs an int argument", arg)
            return replace(e, args=args, ty=result)
        fn = self.functions.get(e.name)
        if fn is None:
            raise self.fail(f"call to undefined function {e.name!r}", e)
        if len(args) != len(fn.params):
            raise self.fail(f"{e.name} expects {len(fn.params)} argument(s)", e)
        for arg, p in zip(args, fn.params):
            if p.length is None:
                self.scalar(arg, f"argument {p.name!r}")
            else:
                info = scope.lookup(arg.name) if isinstance(arg, Var) else None
                if arg.ty != ARRAY or info is None or info[1] != p.length:
                    raise self.fail(
                        f"type mismatch: {e.name} parameter {p.name!r} needs double[{p.length}]", arg
                    )
        if fn.ret_type == VOID and not allow_void:
            raise self.fail(f"void function {e.name!r} used as a value", e)
        return replace(e, args=args, ty=fn.ret_type)


def typecheck(program: Program) -> TypedProgram:
    checker = _Checker(program)
    try:
        entry = program.entry_function
    except KeyError:
        raise FpcTypeError(f"entry function {program.entry!r} is not defined") from None
    functions = tuple(checker.check_function(fn) for fn in program.functions)
    if not entry.params:
        raise FpcTypeError(
            f"entry function {entry.name!r} has no floating-point inputs", entry.line
        )
    dim = sum(p.width for p in entry.params)
    return TypedProgram(replace(program, functions=functions), dim)


def load(source: str, entry: Optional[str] = None) -> TypedProgram:
    """Parse and typecheck in one step."""
    from .parser import parse

    return typecheck(parse(source, entry))
