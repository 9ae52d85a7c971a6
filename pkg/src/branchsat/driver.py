"""Test generation loop and the random-testing baseline."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from .coverage import CoverageState, mark_infeasible_from, record_trace, report
from .instrument import instrument, make_objective
from .lang.nodes import BranchId, Program, sort_branches
from .lang.parser import parse
from .lang.typecheck import TypedProgram, typecheck
from .optimize import LocalMinConfig, McmcConfig, mcmc_minimize
from .runtime import DEFAULT_EPSILON, DEFAULT_STEP_BUDGET, CompiledProgram, check_epsilon

ALL_EXPLORED = "all-explored"
STARTS_EXHAUSTED = "starts-exhausted"
TIME_OUT = "time-out"

_SPECIAL_VALUES = np.array([0.0, 1.0, -1.0, 0.5, -0.5])


@dataclass(frozen=True)
class SamplerConfig:
    """Per-coordinate mixture for starting points.

    With probability ``wide_pct`` a coordinate is uniform on
    [-wide_range, wide_range], with ``special_pct`` it is a "special"
    value (half the time one of 0, +-1, +-0.5, otherwise uniform on
    [-4, 4]), and otherwise uniform on [-narrow_range, narrow_range].
    """

    wide_pct: float = 0.2
    special_pct: float = 0.1
    narrow_range: float = 1e3
    wide_range: float = 1e8

    def __post_init__(self):
        if not (0 <= self.wide_pct <= 1 and 0 <= self.special_pct <= 1):
            raise ValueError("sampler percentages must lie in [0, 1]")
        if self.wide_pct + self.special_pct > 1 + 1e-12:
            raise ValueError("sampler percentages exceed 1")
        if not (0 < self.narrow_range < math.inf and 0 < self.wide_range < math.inf):
            raise ValueError("sampler ranges must be positive and finite")

    @property
    def narrow_pct(self) -> float:
        return max(0.0, 1.0 - self.wide_pct - self.special_pct)


def sample_start(rng, dim: int, params: SamplerConfig = SamplerConfig()) -> np.ndarray:
    if dim < 1:
        raise ValueError("dim must be at least 1")
    bucket = rng.random(dim)
    narrow = rng.uniform(-params.narrow_range, params.narrow_range, dim)
    wide = rng.uniform(-params.wide_range, params.wide_range, dim)
    discrete = _SPECIAL_VALUES[rng.integers(0, len(_SPECIAL_VALUES), dim)]
    small = rng.uniform(-4.0, 4.0, dim)
    special = np.where(rng.random(dim) < 0.5, discrete, small)
    out = np.where(bucket < params.wide_pct, wide, narrow)
    return np.where((bucket >= params.wide_pct) & (bucket < params.wide_pct + params.special_pct),
                    special, out)


@dataclass(frozen=True)
class DriverConfig:
    n_start: int = 500
    n_iter: int = 5
    lm: LocalMinConfig = LocalMinConfig()
    step_size: float = 0.5
    temperature: float = 1.0
    epsilon: float = DEFAULT_EPSILON
    step_budget: int = DEFAULT_STEP_BUDGET
    wall_budget: float = 60.0
    sampler: SamplerConfig = SamplerConfig()
    seed: Optional[int] = None
    literal_last_sample: bool = False

    def __post_init__(self):
        if self.n_start < 1:
            raise ValueError("n_start must be at least 1")
        if self.step_budget < 1:
            raise ValueError("step_budget must be at least 1")
        if not self.wall_budget > 0:
            raise ValueError("wall_budget must be positive")
        check_epsilon(self.epsilon)
        self.mcmc  # validates n_iter, step_size, temperature

    @property
    def mcmc(self) -> McmcConfig:
        return McmcConfig(self.n_iter, self.step_size, self.temperature, self.seed,
                          self.literal_last_sample)


@dataclass(frozen=True)
class TestCase:
    x: Tuple[float, ...]
    taken: Tuple[BranchId, ...]
    newly_saturated: FrozenSet[BranchId]
    value: float = 0.0
    returned: Optional[float] = None


@dataclass(frozen=True)
class PositiveMinimum:
    """A completed minimization that stayed above zero."""

    x: Tuple[float, ...]
    value: float
    flagged_infeasible: Optional[BranchId] = None


@dataclass
class TestSuite:
    inputs: List[TestCase]
    coverage: CoverageState
    wall_time: float = 0.0
    evaluations: int = 0
    starts: int = 0
    termination: str = STARTS_EXHAUSTED
    positive_minima: List[PositiveMinimum] = field(default_factory=list)

    def report(self):
        return report(self.coverage)


ProgramLike = Union[str, Program, TypedProgram]


def _typed(program: ProgramLike, entry: Optional[str]) -> TypedProgram:
    if isinstance(program, str):
        return typecheck(parse(program, entry))
    if isinstance(program, TypedProgram):
        if entry is None or entry == program.entry:
            return program
        program = program.program
    if entry is not None and entry != program.entry:
        program = replace(program, entry=entry)
    return typecheck(program)


def _targets(typed: TypedProgram, targets) -> FrozenSet[str]:
    names = {typed.entry} if targets is None else set(targets) | {typed.entry}
    return frozenset(names)


def generate_tests(program: ProgramLike, entry: Optional[str] = None, targets=None,
                   cfg: DriverConfig = DriverConfig()) -> TestSuite:
    """Minimize the representing function from successive random starts.

    Zero-valued minima become tests and update coverage; a completed
    minimization that stays positive flags the untaken side of the last
    conditional it reached as infeasible.
    """
    t0 = time.monotonic()
    deadline = t0 + cfg.wall_budget
    typed = _typed(program, entry)
    names = _targets(typed, targets)
    inst = instrument(typed, names)
    state = CoverageState.initial(typed, names)
    rng = np.random.default_rng(cfg.seed)
    lm, mc = cfg.lm, cfg.mcmc
    suite = TestSuite([], state)
    stop = lambda x, f: f <= 0.0  # noqa: E731

    if not state.universe:
        # nothing to search for; one run still feeds the line counter
        x = sample_start(rng, typed.input_dim, cfg.sampler)
        objective = make_objective(inst, state, cfg.epsilon, cfg.step_budget)
        suite.coverage = record_trace(state, objective.trace(x))
        suite.termination = ALL_EXPLORED
        suite.wall_time = time.monotonic() - t0
        return suite

    termination = STARTS_EXHAUSTED
    for _ in range(cfg.n_start):
        if state.all_explored:
            termination = ALL_EXPLORED
            break
        if time.monotonic() > deadline:
            termination = TIME_OUT
            break
        x0 = sample_start(rng, typed.input_dim, cfg.sampler)
        objective = make_objective(inst, state, cfg.epsilon, cfg.step_budget)
        res = mcmc_minimize(objective, x0, lm, mc, stop=stop, target=0.0, deadline=deadline, rng=rng)
        suite.starts += 1
        suite.evaluations += res.evaluations
        x_star = tuple(float(v) for v in res.x_star)
        if res.f_star == 0.0:
            trace = objective.trace(res.x_star)
            before = state.explored
            state = record_trace(state, trace)
            suite.inputs.append(
                TestCase(x_star, trace.taken, state.explored - before, 0.0, trace.returned)
            )
        elif not res.timed_out:
            flagged = None
            if not res.stopped_early and math.isfinite(res.f_star):
                trace = objective.trace(res.x_star)
                before = state.infeasible
                state = mark_infeasible_from(state, trace)
                new = state.infeasible - before
                flagged = next(iter(new)) if new else None
            suite.positive_minima.append(PositiveMinimum(x_star, res.f_star, flagged))
        if res.timed_out:
            termination = TIME_OUT
            break
    else:
        if state.all_explored:
            termination = ALL_EXPLORED

    suite.coverage = state
    suite.termination = termination
    suite.wall_time = time.monotonic() - t0
    return suite


def random_baseline(program: ProgramLike, entry: Optional[str] = None, budget: Optional[float] = None,
                    trials: Optional[int] = None, rng=None, targets=None,
                    sampler: SamplerConfig = SamplerConfig(),
                    step_budget: int = DEFAULT_STEP_BUDGET) -> TestSuite:
    """Plain random testing with the start sampler; ``budget`` in seconds,
    ``trials`` as a count, whichever runs out first."""
    if budget is None and trials is None:
        raise ValueError("random_baseline needs a time budget or a trial count")
    t0 = time.monotonic()
    typed = _typed(program, entry)
    names = _targets(typed, targets)
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    compiled = CompiledProgram(typed, (), names)
    state = CoverageState.initial(typed, names)
    suite = TestSuite([], state)
    deadline = None if budget is None else t0 + budget
    n = 0
    while trials is None or n < trials:
        if state.covered >= state.universe and state.lines_hit >= state.lines_total:
            break
        if deadline is not None and time.monotonic() > deadline:
            break
        x = sample_start(rng, typed.input_dim, sampler)
        trace = compiled.run(x, None, DEFAULT_EPSILON, step_budget)
        n += 1
        if not (set(trace.taken) <= state.covered and trace.lines <= state.lines_hit):
            before = state.covered
            state = record_trace(state, trace)
            new = state.covered - before
            if new:
                suite.inputs.append(TestCase(tuple(float(v) for v in x), trace.taken,
                                             frozenset(new), math.nan, trace.returned))
    suite.coverage = state
    suite.starts = n
    suite.evaluations = n
    suite.termination = ALL_EXPLORED if state.all_explored else (
        TIME_OUT if deadline is not None and (trials is None or n < trials) else STARTS_EXHAUSTED)
    suite.wall_time = time.monotonic() - t0
    return suite


def explored_branches(suite: TestSuite) -> List[BranchId]:
    return sort_branches(suite.coverage.explored)
