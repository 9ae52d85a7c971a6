import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from branchsat.optimize import (
    LocalMinConfig,
    McmcConfig,
    _accept_probability,
    local_minimize,
    mcmc_minimize,
    propose_perturbation,
)


def two_basin(x):
    x = x[0]
    return ((x + 1) ** 2 - 4) ** 2 if x <= 1 else (x * x - 4) ** 2


def test_floor_reached_from_the_right():
    res = local_minimize(lambda x: 0.0 if x[0] <= 1 else (x[0] - 1) ** 2, [5.0])
    assert res.f_star == 0.0 and res.x_star[0] <= 1


def test_quadratic_minimum():
    res = local_minimize(lambda x: (x[0] - 3) ** 2 + (x[1] - 5) ** 2, [0.0, 0.0])
    assert np.allclose(res.x_star, [3, 5], atol=1e-6)


def test_two_basin_left_minimum():
    res = local_minimize(two_basin, [-4.0])
    assert abs(res.x_star[0] + 3) < 1e-3 and res.f_star < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_convex_quadratics(dim, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim))
    h = a @ a.T + dim * np.eye(dim)
    c = rng.uniform(-5, 5, size=dim)
    f = lambda x: float((x - c) @ h @ (x - c))  # noqa: E731
    res = local_minimize(f, rng.uniform(-10, 10, size=dim))
    assert res.f_star <= 1e-8


def test_result_not_above_start():
    f = lambda x: abs(math.sin(x[0])) + 0.1 * abs(x[0])  # noqa: E731
    for x0 in (-7.3, 0.2, 11.0):
        assert local_minimize(f, [x0]).f_star <= f([x0])


def test_non_finite_start_rejected():
    for bad in ([math.nan], [math.inf], []):
        with pytest.raises(ValueError):
            local_minimize(lambda x: 0.0, bad)


def test_inf_plateau_does_not_crash():
    res = local_minimize(lambda x: math.inf if x[0] > 0 else x[0] ** 2, [3.0])
    assert math.isinf(res.f_star) or res.f_star >= 0


def test_zero_objective_stops_immediately():
    res = mcmc_minimize(lambda x: 0.0, [2.5], stop=lambda x, f: f == 0.0, rng=np.random.default_rng(0))
    assert res.f_star == 0.0 and res.stopped_early and res.accepted == 0
    res = mcmc_minimize(lambda x: 0.0, [2.5], target=0.0, rng=np.random.default_rng(0))
    assert res.stopped_early and res.evaluations == 1


def test_constant_one_objective():
    res = mcmc_minimize(lambda x: 1.0, [-5.2], rng=np.random.default_rng(0))
    assert res.f_star == 1.0 and not res.stopped_early


def test_best_seen_not_worse_than_first_local():
    for seed in range(5):
        x0 = [np.random.default_rng(seed).uniform(-10, 10)]
        first = local_minimize(two_basin, x0).f_star
        assert mcmc_minimize(two_basin, x0, rng=np.random.default_rng(seed)).f_star <= first


def test_seed_determinism():
    a = mcmc_minimize(two_basin, [7.0], mc=McmcConfig(seed=11), stop=lambda x, f: False)
    b = mcmc_minimize(two_basin, [7.0], mc=McmcConfig(seed=11), stop=lambda x, f: False)
    assert a.x_star.tobytes() == b.x_star.tobytes() and a.f_star == b.f_star
    assert a.evaluations == b.evaluations and a.accepted == b.accepted


def test_deadline():
    slow = lambda x: (time.sleep(0.001), (x[0] - 1) ** 2 + 1)[1]  # noqa: E731
    res = mcmc_minimize(slow, [100.0], deadline=time.monotonic() + 0.05, rng=np.random.default_rng(0))
    assert res.timed_out


def test_target_stops_local_search():
    res = local_minimize(lambda x: (x[0] - 1) ** 2, [50.0], target=1.0)
    assert res.stopped_early and res.f_star <= 1.0


class ScriptedRng:
    """Real perturbations, scripted acceptance draws."""

    def __init__(self, draws):
        self.inner = np.random.default_rng(0)
        self.draws = list(draws)

    def uniform(self, low=0.0, high=1.0, size=None):
        if size is None:
            return self.draws.pop(0)
        return self.inner.uniform(low, high, size)


def test_downhill_always_accepted():
    # every perturbed local search lands lower than the 1.0 plateau start
    values = iter([1.0] + [0.5, 0.25, 0.125] * 100)
    f = lambda x: next(values)  # noqa: E731
    lm = LocalMinConfig(max_iter=1)
    res = mcmc_minimize(f, [0.0], lm=lm, mc=McmcConfig(n_iter=3), rng=ScriptedRng([0.999999] * 3))
    assert res.accepted >= 1


def test_acceptance_probability():
    assert _accept_probability(1.0, 0.5, 1.0) == 1.0
    assert _accept_probability(1.0, math.inf, 1.0) == 0.0
    assert _accept_probability(1.0, 2.0, 1.0) == pytest.approx(math.exp(-1))
    assert _accept_probability(1.0, 3.0, 2.0) == pytest.approx(math.exp(-1))
    assert _accept_probability(math.inf, 5.0, 1.0) == 1.0


def test_uphill_rejected_by_large_draw():
    # a constant objective never goes strictly downhill; exp(0) = 1 accepts
    res = mcmc_minimize(lambda x: 1.0, [0.0], mc=McmcConfig(n_iter=2), rng=ScriptedRng([0.5, 0.5]))
    assert res.accepted == 2


def test_literal_last_sample_returns_chain_point():
    def f(x):
        return min(abs(x[0] - 10.0), 3.0)

    res = mcmc_minimize(f, [0.0], mc=McmcConfig(n_iter=3, literal_last_sample=True),
                        rng=np.random.default_rng(3))
    assert res.f_star == f(res.x_star)


def test_perturbation():
    rng = np.random.default_rng(5)
    d = propose_perturbation(rng, 1, 0.5)
    assert d.shape == (1,) and -0.5 <= d[0] <= 0.5
    assert propose_perturbation(rng, 3, 0.5).shape == (3,)
    a = propose_perturbation(np.random.default_rng(9), 4, 1.0)
    b = propose_perturbation(np.random.default_rng(9), 4, 1.0)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        propose_perturbation(rng, 0, 0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        LocalMinConfig(ftol=0)
    with pytest.raises(ValueError):
        LocalMinConfig(max_iter=0)
    with pytest.raises(ValueError):
        McmcConfig(step_size=0)
    with pytest.raises(ValueError):
        McmcConfig(temperature=-1)
