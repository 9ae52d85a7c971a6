from pathlib import Path

import pytest

from branchsat.lang import load

FIXTURES = Path(__file__).parent / "fixtures"
BENCHMARKS = Path(__file__).resolve().parents[1] / "src" / "branchsat" / "benchmarks"


def fixture_source(name: str) -> str:
    return (FIXTURES / name).read_text()


def benchmark_source(name: str) -> str:
    return (BENCHMARKS / f"{name}.fpc").read_text()


@pytest.fixture
def foo():
    return load(fixture_source("foo.fpc"), "foo")


@pytest.fixture
def foo_neg():
    return load(fixture_source("foo_neg.fpc"), "foo")


@pytest.fixture
def nested():
    return load(fixture_source("nested.fpc"), "nested")


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
