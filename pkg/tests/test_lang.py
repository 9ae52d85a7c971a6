import pytest

from branchsat.lang import (
    BranchId,
    FpcTypeError,
    ParseError,
    build_cfg,
    build_program_cfg,
    format_program,
    list_branches,
    load,
    parse,
)
from branchsat.lang.cfg import CFG

from conftest import benchmark_source, fixture_source

B = BranchId.parse


def test_smallest_conditional_program():
    prog = parse("double f(double x){ if (x <= 1) { x = x + 1; } return x; }")
    assert len(prog.functions) == 1
    assert prog.functions[0].labels == (0,)


def test_foo_conditionals():
    prog = parse(fixture_source("foo.fpc"), "foo")
    fn = prog.function("foo")
    assert fn.labels == (0, 1)
    assert [str(b) for b in list_branches(fn)] == ["0T", "0F", "1T", "1F"]


def test_malformed_comparison_is_rejected():
    with pytest.raises(ParseError) as info:
        parse("double f(double x){ if (x <) }")
    assert info.value.line == 1


@pytest.mark.parametrize("src", [
    "double f(double x){ return x; } double f(double y){ return y; }",
    "double f(double x, double x){ return x; }",
    "double f(double x){ if (x < 1 < 2) { return x; } return x; }",
    "double f(double x){ x = ; }",
    "double f(double x){ return x $ 1; }",
])
def test_parse_errors(src):
    with pytest.raises(ParseError):
        parse(src)


def test_labels_are_deterministic():
    src = benchmark_source("tanh")
    a, b = parse(src), parse(src)
    assert [fn.labels for fn in a.functions] == [fn.labels for fn in b.functions]
    assert list_branches(a.entry_function) == list_branches(b.entry_function)


def test_input_dimension_flattens_arrays():
    typed = load("double f(double a, double b[2]){ return a + b[0] + b[1]; }")
    assert typed.input_dim == 3


def test_int_comparand_is_promoted():
    typed = load("double f(double x){ int i; i = 3; if (i > 0) { return x; } return -x; }")
    cond = typed.program.entry_function.body.stmts[-2].cond
    assert cond.promote == (True, True)
    mixed = load("double f(double x){ int i; i = 3; if (i > x) { return x; } return -x; }")
    assert mixed.program.entry_function.body.stmts[-2].cond.promote == (True, False)


@pytest.mark.parametrize("src", [
    "double f(){ return 1.0; }",
    "double f(double x){ return y; }",
    "double f(double x){ return g(x); }",
    "double f(double x){ return x; x = 1; }",
    "double f(double x){ return x & 1; }",
    "double f(double a[2]){ if (a < 1) { return 0; } return 1; }",
])
def test_type_errors(src):
    with pytest.raises(FpcTypeError):
        load(src)


def test_foo_cfg_sequential_descendants(foo):
    cfg = build_cfg(foo.program.function("foo"))
    assert cfg.descendants(B("0F")) == {B("1T"), B("1F")}
    assert cfg.descendants(B("0T")) == {B("1T"), B("1F")}
    assert cfg.descendants(B("1T")) == frozenset()


def test_nested_cfg_descendants(nested):
    cfg = build_cfg(nested.program.entry_function)
    assert cfg.descendants(B("0T")) == {B("1T"), B("1F")}
    assert cfg.descendants(B("0F")) == frozenset()


def test_branchless_cfg():
    typed = load("double f(double x){ return x * 2; }")
    assert build_cfg(typed.program.entry_function).branches() == []
    assert list_branches(typed.program.entry_function) == []


def test_loop_guard_is_not_its_own_descendant():
    typed = load("double f(double x){ int i; i = 0; while (i < 3) { i = i + 1; } return x; }")
    cfg = build_cfg(typed.program.entry_function)
    assert cfg.descendants(B("0T")) == {B("0F")}
    assert B("0T") not in cfg.descendants(B("0T"))


def test_unknown_branch():
    cfg = CFG("s", "e", [("s", "e", None)])
    with pytest.raises(KeyError):
        cfg.descendants(B("0T"))


def test_descendants_transitively_closed():
    typed = load(benchmark_source("atan2"), "atan2")
    cfg = build_program_cfg(typed.program)
    for b in cfg.branches():
        for c in cfg.descendants(b):
            assert cfg.descendants(c) - {b} <= cfg.descendants(b)


def test_tanh_branch_count():
    typed = load(benchmark_source("tanh"), "tanh")
    # 6 conditionals in the Fdlibm routine, two branches each
    assert len(list_branches(typed.program.entry_function)) == 12


def test_interprocedural_descendants_reach_callee():
    src = """
    double g(double x) { if (x < 0) { return -x; } return x; }
    double f(double x) { double y; if (x > 5) { x = x - 5; } y = g(x); return y; }
    """
    typed = load(src, "f")
    cfg = build_program_cfg(typed.program)
    f_first, g_first = typed.program.function("f").labels[0], typed.program.function("g").labels[0]
    desc = cfg.descendants(BranchId(f_first, False))
    assert {BranchId(g_first, True), BranchId(g_first, False)} <= desc
    # returning from g does not loop back into f's earlier conditional
    assert BranchId(f_first, True) not in cfg.descendants(BranchId(g_first, True))


def test_printer_round_trip():
    src = benchmark_source("kernel_cos")
    prog = parse(src, "kernel_cos")
    again = parse(format_program(prog), "kernel_cos")
    assert format_program(again) == format_program(prog)
