import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from branchsat.coverage import CoverageState, record_trace
from branchsat.instrument import InstrumentError, instrument, make_objective
from branchsat.lang import BranchId, load
from branchsat.runtime import evaluate_objective, run_uninstrumented

from conftest import benchmark_source, fixture_source

B = BranchId.parse


def state_with(typed, explored):
    st0 = CoverageState.initial(typed)
    return CoverageState(st0.cfg, st0.universe, explored=frozenset(B(s) for s in explored))


def test_foo_injections(foo):
    ip = instrument(foo)
    assert ip.targets == {"foo"}
    assert [ip.table[l].describe() for l in ip.labels] == [
        "r = pen(l0, <=, x, (double) 1);",
        "r = pen(l1, ==, y, (double) 4);",
    ]
    assert ip.dim == 1


def test_foo_goo_only_goo_conditional():
    typed = load(fixture_source("foo_goo.fpc"), "foo")
    ip = instrument(typed, {"foo", "goo"})
    assert [inj.function for inj in ip.table.values()] == ["goo"]
    assert ip.table[ip.labels[0]].op == "<="


def test_branchless_target_has_empty_table():
    ip = instrument(load("double f(double x){ return x + 1; }"))
    assert ip.table == {}
    assert make_objective(ip, state_with(ip.base, []))([3.0]) == 1.0


def test_unknown_target():
    with pytest.raises(InstrumentError):
        instrument(load("double f(double x){ return x; }"), {"g"})


def test_snapshot_must_match(foo, nested):
    with pytest.raises(InstrumentError):
        make_objective(instrument(foo), CoverageState.initial(load("double f(double x){ return x; }")))


def test_snapshot_objectives(foo):
    ip = instrument(foo)
    row2 = make_objective(ip, state_with(foo, ["1F"]))
    assert evaluate_objective(row2, [2.0]) == 0.0
    assert evaluate_objective(row2, [0.0]) == 9.0
    row3 = make_objective(ip, state_with(foo, ["0T", "1T", "1F"]))
    assert row3([1.1]) == 0.0


def test_dimension_checked(foo):
    f = make_objective(instrument(foo), state_with(foo, []))
    with pytest.raises(ValueError):
        f([1.0, 2.0])


def test_snapshot_captured_by_value(foo):
    ip = instrument(foo)
    state = CoverageState.initial(foo)
    f = make_objective(ip, state)
    before = f([0.0])
    state = record_trace(state, f.trace([0.0]))
    assert f([0.0]) == before == 0.0
    assert make_objective(ip, state)([0.0]) != before


def test_dump_annotates_every_conditional():
    typed = load(benchmark_source("tanh"), "tanh")
    text = instrument(typed).dump()
    assert text.count("r = pen(") == 6
    assert "jx & 0x7fffffff" in text or "jx & 2147483647" in text


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-1e9, max_value=1e9), min_size=2, max_size=2),
       st.sets(st.sampled_from([f"{i}{s}" for i in range(8) for s in "TF"])))
def test_transparency_and_nonnegativity(x, explored):
    typed = load(benchmark_source("kernel_cos"), "kernel_cos")
    ip = instrument(typed)
    f = make_objective(ip, state_with(typed, explored))
    t = f.trace(x)
    plain = run_uninstrumented(typed, x)
    assert t.taken == plain.taken
    assert (t.returned == plain.returned) or (math.isnan(t.returned) and math.isnan(plain.returned))
    assert f(x) >= 0


def test_nan_objective_maps_to_inf():
    typed = load("double f(double x){ if (x * 0 == 0) { return 1; } return 0; }")
    ip = instrument(typed)
    f = make_objective(ip, state_with(typed, ["0F"]))
    assert f([math.inf]) == math.inf
    assert f(np.array([1.0])) == 0.0
