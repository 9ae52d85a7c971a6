"""Branch-coverage test generation for floating-point programs.

A program written in FPC (a small C-like language) is instrumented so
that a single run returns a non-negative value that is zero exactly when
the input exercises a not-yet-saturated branch. Minimizing that value
from many random starts yields a covering test suite.
"""

from .coverage import CoverageReport, CoverageState, mark_infeasible_from, record_trace, report
from .driver import DriverConfig, SamplerConfig, TestSuite, generate_tests, random_baseline, sample_start
from .instrument import InstrumentedProgram, Objective, instrument, make_objective
from .lang import BranchId, load, parse, typecheck
from .optimize import LocalMinConfig, McmcConfig, MinimizeResult, local_minimize, mcmc_minimize
from .runtime import branch_distance, execute, opposite, pen

__version__ = "0.1.0"

__all__ = [
    "BranchId",
    "CoverageReport",
    "CoverageState",
    "DriverConfig",
    "InstrumentedProgram",
    "LocalMinConfig",
    "McmcConfig",
    "MinimizeResult",
    "Objective",
    "SamplerConfig",
    "TestSuite",
    "branch_distance",
    "execute",
    "generate_tests",
    "instrument",
    "load",
    "local_minimize",
    "make_objective",
    "mark_infeasible_from",
    "mcmc_minimize",
    "opposite",
    "parse",
    "pen",
    "random_baseline",
    "record_trace",
    "report",
    "sample_start",
    "typecheck",
]
