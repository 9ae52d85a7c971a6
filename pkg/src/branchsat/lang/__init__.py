"""FPC: a small C-like floating-point language (parser, checker, CFGs)."""

from .cfg import CFG, ProgramCFG, build_cfg, build_program_cfg, descendants, list_branches
from .nodes import BranchId, FunctionDef, Program, sort_branches
from .parser import FpcError, ParseError, parse
from .printer import format_program
from .typecheck import FpcTypeError, TypedProgram, load, typecheck

__all__ = [
    "CFG",
    "ProgramCFG",
    "BranchId",
    "FpcError",
    "FpcTypeError",
    "FunctionDef",
    "ParseError",
    "Program",
    "TypedProgram",
    "build_cfg",
    "build_program_cfg",
    "descendants",
    "format_program",
    "list_branches",
    "load",
    "parse",
    "sort_branches",
    "typecheck",
]
