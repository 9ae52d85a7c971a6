"""Render FPC ASTs back to source text."""

from __future__ import annotations

from .nodes import (
    Assign,
    Binary,
    Block,
    Call,
    Cast,
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

_PREC = {"|": 1, "^": 2, "&": 3, "<<": 4, ">>": 4, "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}


def format_number(value) -> str:
    if isinstance(value, int):
        return str(value)
    text = repr(float(value))
    if text in ("inf", "-inf", "nan"):
        return text
    if "." not in text and "e" not in text:
        text += ".0"
    return text


def format_expr(e, parent_prec: int = 0) -> str:
    if isinstance(e, Num):
        text = format_number(e.value)
        return f"({text})" if text.startswith("-") and parent_prec else text
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Index):
        return f"{e.name}[{format_expr(e.index)}]"
    if isinstance(e, Unary):
        return f"{e.op}{format_expr(e.operand, 7)}"
    if isinstance(e, Cast):
        return f"({e.to}) {format_expr(e.operand, 7)}"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        text = f"{format_expr(e.left, prec)} {e.op} {format_expr(e.right, prec + 1)}"
        return f"({text})" if prec < parent_prec else text
    raise TypeError(e)


def format_condition(cond) -> str:
    return f"{format_expr(cond.left)} {cond.op} {format_expr(cond.right)}"


def _lines(stmt, indent, annotate):
    pad = "    " * indent
    if isinstance(stmt, Block):
        out = []
        for s in stmt.stmts:
            out.extend(_lines(s, indent, annotate))
        return out
    if isinstance(stmt, Decl):
        init = "" if stmt.init is None else f" = {format_expr(stmt.init)}"
        return [f"{pad}{stmt.type} {stmt.name}{init};"]
    if isinstance(stmt, Assign):
        return [f"{pad}{format_expr(stmt.target)} = {format_expr(stmt.value)};"]
    if isinstance(stmt, ExprStmt):
        return [f"{pad}{format_expr(stmt.expr)};"]
    if isinstance(stmt, Return):
        value = "" if stmt.value is None else " " + format_expr(stmt.value)
        return [f"{pad}return{value};"]
    if isinstance(stmt, (If, While)):
        out = []
        note = annotate(stmt) if annotate else None
        if note:
            out.append(f"{pad}{note}")
        keyword = "if" if isinstance(stmt, If) else "while"
        out.append(f"{pad}{keyword} ({format_condition(stmt.cond)}) {{  /* l{stmt.label} */")
        body = stmt.then if isinstance(stmt, If) else stmt.body
        out.extend(_lines(body, indent + 1, annotate))
        if isinstance(stmt, If) and stmt.orelse is not None:
            out.append(f"{pad}}} else {{")
            out.extend(_lines(stmt.orelse, indent + 1, annotate))
        out.append(f"{pad}}}")
        return out
    raise TypeError(stmt)


def format_function(fn: FunctionDef, annotate=None) -> str:
    params = ", ".join(
        f"double {p.name}" + ("" if p.length is None else f"[{p.length}]") for p in fn.params
    )
    lines = [f"{fn.ret_type} {fn.name}({params}) {{"]
    lines.extend(_lines(fn.body, 1, annotate))
    lines.append("}")
    return "\n".join(lines)


def format_program(program: Program, annotate=None) -> str:
    """``annotate(stmt)`` may return a comment line to emit before a conditional."""
    return "\n\n".join(format_function(fn, annotate) for fn in program.functions) + "\n"
