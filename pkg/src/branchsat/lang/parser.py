"""Lexer and recursive-descent parser for FPC source text."""

from __future__ import annotations

import re
from typing import List, NamedTuple, Optional

from .nodes import (
    COMPARISONS,
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
    Param,
    Program,
    Return,
    Unary,
    Var,
    While,
)


class FpcError(Exception):
    """Base class for frontend errors; carries an optional source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)


class ParseError(FpcError):
    pass


class Token(NamedTuple):
    kind: str  # 'num', 'ident', 'kw', 'op', 'eof'
    text: str
    line: int
    col: int


KEYWORDS = {"double", "int", "void", "if", "else", "while", "return"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<hex>0[xX][0-9a-fA-F]+)
  | (?P<float>(?:\d+\.\d*|\.\d+)(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><<=|>>=|\+\+|--|<<|>>|<=|>=|==|!=|\+=|-=|\*=|/=|&=|\|=|\^=|[-+*/%&|^~<>=(){}\[\];,])
    """,
    re.VERBOSE | re.DOTALL,
)

INT_MIN = -(2**31)
INT_MAX = 2**31 - 1


def tokenize(source: str) -> List[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "bcomment":
            line += text.count("\n")
            if "\n" in text:
                line_start = pos + text.rindex("\n") + 1
        elif kind in ("ws", "lcomment"):
            pass
        elif kind in ("hex", "int", "float"):
            tokens.append(Token("num", text, line, col))
        elif kind == "ident":
            tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
        else:
            tokens.append(Token("op", text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _int_literal(text: str, tok: Token) -> int:
    value = int(text, 16) if text[:2].lower() == "0x" else int(text)
    if value > 2**32 - 1:
        raise ParseError(f"integer literal {text} does not fit in 32 bits", tok.line, tok.col)
    # hex constants such as 0x80000000 wrap to the signed representation
    if value > INT_MAX:
        value -= 2**32
    return value


_BINARY_LEVELS = (
    ("|",),
    ("^",),
    ("&",),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
)

_COMPOUND = {"+=": "+", "-=": "-", "*=": "*", "/=": "/", "&=": "&", "|=": "|", "^=": "^",
             "<<=": "<<", ">>=": ">>"}


class Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0
        self.next_label = 0

    # -- token helpers ---------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ParseError(f"{message} (found {found})", tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error("expected identifier")
        return self.advance()

    # -- top level -------------------------------------------------------

    def parse_program(self, entry: Optional[str]) -> Program:
        functions = []
        seen = set()
        while self.tok.kind != "eof":
            fn = self.parse_function()
            if fn.name in seen:
                raise ParseError(f"duplicate function name {fn.name!r}", fn.line, 1)
            seen.add(fn.name)
            functions.append(fn)
        if entry is None:
            if not functions:
                raise ParseError("program defines no functions", 1, 1)
            entry = functions[-1].name
        return Program(tuple(functions), entry, self.source)

    def parse_function(self) -> FunctionDef:
        tok = self.tok
        if not (tok.kind == "kw" and tok.text in ("double", "void")):
            raise self.error("expected function return type 'double' or 'void'")
        ret_type = self.advance().text
        name = self.expect_ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                params.append(self.parse_param(params))
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        body = self.parse_block()
        return FunctionDef(name, tuple(params), ret_type, body, tok.line)

    def parse_param(self, existing) -> Param:
        tok = self.tok
        if not self.at("double"):
            raise self.error("parameters must be 'double' or fixed-length 'double' arrays")
        self.advance()
        name_tok = self.expect_ident()
        length = None
        if self.at("["):
            self.advance()
            len_tok = self.tok
            if len_tok.kind != "num" or not re.fullmatch(r"\d+|0[xX][0-9a-fA-F]+", len_tok.text):
                raise self.error("expected array length")
            self.advance()
            length = _int_literal(len_tok.text, len_tok)
            if length <= 0:
                raise ParseError("array length must be positive", len_tok.line, len_tok.col)
            self.expect("]")
        if any(p.name == name_tok.text for p in existing):
            raise ParseError(f"duplicate parameter name {name_tok.text!r}", tok.line, tok.col)
        return Param(name_tok.text, length)

    # -- statements ------------------------------------------------------

    def parse_block(self) -> Block:
        start = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            stmts.extend(self.parse_statement())
        self.expect("}")
        return Block(tuple(stmts), start.line)

    def parse_statement(self) -> list:
        tok = self.tok
        if self.at("{"):
            return [self.parse_block()]
        if self.at("double") or self.at("int"):
            return self.parse_decl()
        if self.at("if"):
            return [self.parse_if()]
        if self.at("while"):
            return [self.parse_while()]
        if self.at("return"):
            self.advance()
            value = None if self.at(";") else self.parse_expr()
            self.expect(";")
            return [Return(value, tok.line)]
        if self.at(";"):
            self.advance()
            return []
        return [self.parse_simple()]

    def parse_decl(self) -> list:
        type_tok = self.advance()
        decls = []
        while True:
            name = self.expect_ident()
            init = None
            if self.at("["):
                raise self.error("local arrays are not supported")
            if self.at("="):
                self.advance()
                init = self.parse_expr()
            decls.append(Decl(type_tok.text, name.text, init, name.line))
            if not self.at(","):
                break
            self.advance()
        self.expect(";")
        return decls

    def parse_simple(self) -> object:
        tok = self.tok
        if tok.kind == "ident" and self.peek().text == "(":
            expr = self.parse_expr()
            self.expect(";")
            return ExprStmt(expr, tok.line)
        if tok.kind != "ident":
            raise self.error("expected statement")
        target = self.parse_postfix()
        if not isinstance(target, (Var, Index)):
            raise self.error("expected assignable expression", tok)
        op = self.tok
        if self.at("="):
            self.advance()
            value = self.parse_expr()
        elif op.text in _COMPOUND and op.kind == "op":
            self.advance()
            rhs = self.parse_expr()
            value = Binary(_COMPOUND[op.text], target, rhs, op.line, op.col)
        elif self.at("++") or self.at("--"):
            self.advance()
            one = Num(1, op.line, op.col)
            value = Binary("+" if op.text == "++" else "-", target, one, op.line, op.col)
        else:
            raise self.error("expected assignment operator")
        self.expect(";")
        return Assign(target, value, tok.line)

    def _take_label(self) -> int:
        label = self.next_label
        self.next_label += 1
        return label

    def parse_if(self) -> If:
        tok = self.advance()
        label = self._take_label()
        self.expect("(")
        cond = self.parse_condition()
        self.expect(")")
        then = self._branch_body()
        orelse = None
        if self.at("else"):
            self.advance()
            orelse = self._branch_body()
        return If(label, cond, then, orelse, tok.line)

    def parse_while(self) -> While:
        tok = self.advance()
        label = self._take_label()
        self.expect("(")
        cond = self.parse_condition()
        self.expect(")")
        body = self._branch_body()
        return While(label, cond, body, tok.line)

    def _branch_body(self):
        stmts = self.parse_statement()
        if len(stmts) == 1:
            return stmts[0]
        return Block(tuple(stmts), self.tok.line)

    def parse_condition(self) -> Compare:
        left = self.parse_expr()
        op = self.tok
        if not (op.kind == "op" and op.text in COMPARISONS):
            raise self.error("expected comparison operator")
        self.advance()
        if self.at(")"):
            raise self.error("malformed comparison: missing right operand")
        right = self.parse_expr()
        if self.tok.kind == "op" and self.tok.text in COMPARISONS:
            raise self.error("chained comparisons are not supported")
        return Compare(op.text, left, right, op.line, op.col)

    # -- expressions -----------------------------------------------------

    def parse_expr(self, level: int = 0):
        if level == len(_BINARY_LEVELS):
            return self.parse_unary()
        left = self.parse_expr(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            op = self.advance()
            right = self.parse_expr(level + 1)
            left = Binary(op.text, left, right, op.line, op.col)
        return left

    def parse_unary(self):
        tok = self.tok
        if tok.kind == "op" and tok.text in ("-", "+", "~"):
            self.advance()
            operand = self.parse_unary()
            if tok.text == "+":
                return operand
            if tok.text == "-" and isinstance(operand, Num):
                return Num(-operand.value, tok.line, tok.col)
            return Unary(tok.text, operand, tok.line, tok.col)
        if self.at("(") and self.peek().kind == "kw" and self.peek().text in ("int", "double"):
            self.advance()
            to = self.advance().text
            self.expect(")")
            return Cast(to, self.parse_unary(), tok.line, tok.col)
        return self.parse_postfix()

    def parse_postfix(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            if re.fullmatch(r"\d+|0[xX][0-9a-fA-F]+", tok.text):
                return Num(_int_literal(tok.text, tok), tok.line, tok.col)
            return Num(float(tok.text), tok.line, tok.col)
        if tok.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.parse_expr())
                        if not self.at(","):
                            break
                        self.advance()
                self.expect(")")
                return Call(tok.text, tuple(args), tok.line, tok.col)
            if self.at("["):
                self.advance()
                index = self.parse_expr()
                self.expect("]")
                return Index(tok.text, index, tok.line, tok.col)
            return Var(tok.text, tok.line, tok.col)
        if self.at("("):
            self.advance()
            expr = self.parse_expr()
            self.expect(")")
            return expr
        raise self.error("expected expression")


def parse(source: str, entry: Optional[str] = None) -> Program:
    """Parse FPC ``source`` into a :class:`Program`.

    Conditionals are labelled 0, 1, ... in source order across the whole
    file. ``entry`` defaults to the last function defined.
    """
    return Parser(source).parse_program(entry)
