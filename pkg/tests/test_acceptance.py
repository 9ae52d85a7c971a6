"""Acceptance criteria 1-9. Each test prints exactly one PASS/FAIL line."""

import itertools
import json
import math
import random
import time
from dataclasses import replace

import numpy as np

from branchsat.bench import run_benchmark_suite
from branchsat.cli import main
from branchsat.coverage import CoverageState, recompute_saturation, saturated
from branchsat.driver import DriverConfig, generate_tests
from branchsat.instrument import instrument, make_objective
from branchsat.lang import BranchId, load
from branchsat.lang.cfg import CFG
from branchsat.optimize import mcmc_minimize
from branchsat.runtime import DEFAULT_EPSILON, branch_distance

from conftest import ACCEPTANCE_LINES, BENCHMARKS, FIXTURES, benchmark_source, fixture_source

EPS = DEFAULT_EPSILON
OPS = ("==", "!=", "<", "<=", ">", ">=")
HOLDS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# -- 1: branch-distance law ------------------------------------------------

def _finite_doubles(rng, n):
    """Mixture of ordinary, huge, tiny and subnormal finite doubles."""
    kind = rng.integers(0, 4, n)
    bits = rng.integers(0, 2**63 - 2**52, n, dtype=np.int64).view(np.float64)
    bits = bits * np.where(rng.random(n) < 0.5, -1.0, 1.0)
    small = rng.integers(-8, 9, n) / 2.0
    uni = rng.uniform(-1e3, 1e3, n)
    sub = rng.integers(-1000, 1000, n) * 5e-324
    return np.select([kind == 0, kind == 1, kind == 2], [bits, small, uni], sub)


def test_criterion_1_branch_distance_law():
    rng = np.random.default_rng(1)
    n = 10**6
    a = _finite_doubles(rng, n)
    b = _finite_doubles(rng, n)
    # a quarter of the pairs are equal or one ulp apart
    tie = rng.random(n)
    b = np.where(tie < 0.15, a, b)
    b = np.where((tie >= 0.15) & (tie < 0.25), np.nextafter(a, np.inf), b)
    assert np.all(np.isfinite(a)) and np.all(np.isfinite(b))
    ops = rng.integers(0, len(OPS), n)
    t0 = time.perf_counter()
    bad = 0
    for op_i, x, y in zip(ops.tolist(), a.tolist(), b.tolist()):
        op = OPS[op_i]
        d = branch_distance(op, x, y, EPS)
        if not d >= 0 or (d == 0) != HOLDS[op](x, y):
            bad += 1
    elapsed = time.perf_counter() - t0
    verdict(1, bad == 0 and elapsed < 5.0,
            f"{n} triples, {bad} violations, {elapsed:.2f}s (limit 5s)")


# -- 2: zeros of the representing function ----------------------------------

def _micro_program(rng):
    dim = int(rng.integers(1, 3))
    k = int(rng.integers(1, 4))
    exprs = ["x", "x * x", "x + 1"] if dim == 1 else ["x", "y", "x + y", "x - y", "x * y"]
    assigns = ["x = x + 1;", "x = x * 0.5;", "x = 0 - x;"]
    if dim == 2:
        assigns += ["y = y - x;", "y = x;"]
    left = [k]

    def cond():
        return f"{rng.choice(exprs)} {rng.choice(OPS)} {float(rng.integers(-6, 7)) / 2}"

    def block():
        out = []
        for _ in range(int(rng.integers(1, 3))):
            if left[0] > 0 and rng.random() < 0.7:
                left[0] -= 1
                s = f"if ({cond()}) {{ {block()} }}"
                if rng.random() < 0.5:
                    s += f" else {{ {block()} }}"
                out.append(s)
            else:
                out.append(str(rng.choice(assigns)))
        return " ".join(out)

    body = block()
    while left[0] > 0:
        left[0] -= 1
        body += f" if ({cond()}) {{ {rng.choice(assigns)} }}"
    params = "double x" if dim == 1 else "double x, double y"
    return dim, f"double f({params}) {{ {body} return x; }}"


def _grid(dim):
    # 10^4 points containing every integer and half-integer constant used above
    if dim == 1:
        return np.arange(-5000, 5000)[:, None] / 1000.0
    g = np.arange(-50, 50) / 10.0
    return np.array(list(itertools.product(g, g)))


def test_criterion_2_zero_iff_new_saturation():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    programs = 25
    checks = bad = snapshots = 0
    for _ in range(programs):
        dim, src = _micro_program(rng)
        typed = load(src, "f")
        ip = instrument(typed)
        base = CoverageState.initial(typed)
        grid = _grid(dim)
        paths = [frozenset(ip.compiled.run(x).taken) for x in grid]
        distinct = sorted(set(paths), key=lambda p: sorted(b.sort_key for b in p))
        # every covered set reachable from some set of executions, grouped by its saturated set
        by_s = {}
        for r in range(len(distinct) + 1):
            for combo in itertools.combinations(distinct, r):
                covered = frozenset().union(*combo)
                s = saturated(base.cfg, base.universe, covered, frozenset())
                by_s.setdefault(s, set()).add(covered)
        for s, covers in by_s.items():
            snapshots += 1
            f = make_objective(ip, replace(base, explored=s))
            zero = [f(x) == 0.0 for x in grid]
            for covered in covers:
                new = {p: bool(saturated(base.cfg, base.universe, covered | p, frozenset()) - s)
                       for p in distinct}
                for z, p in zip(zero, paths):
                    checks += 1
                    bad += z != new[p]
    elapsed = time.perf_counter() - t0
    verdict(2, bad == 0 and elapsed < 120,
            f"{programs} programs, {snapshots} saturated sets, {checks} checks, "
            f"{bad} violations, {elapsed:.1f}s (limit 120s)")


# -- 3: representing-function replay ----------------------------------------

def test_criterion_3_snapshot_replay():
    foo = load(fixture_source("foo.fpc"), "foo")
    ip = instrument(foo)
    base = CoverageState.initial(foo)

    def objective(names):
        return make_objective(ip, replace(base, explored=frozenset(map(BranchId.parse, names))))

    probes = [-5.2, -3.0, 0.0, 1.0, 1.1, 2.0, 7.5]
    rows = [
        ("empty", objective([]), [(x, 0.0) for x in probes]),
        ("{1F}", objective(["1F"]), [(0.0, 9.0), (2.0, 0.0)]),
        ("{0T,1T,1F}", objective(["0T", "1T", "1F"]), [(1.1, 0.0), (0.0, (0.0 - 1.0) ** 2 + EPS)]),
        ("all", objective(["0T", "0F", "1T", "1F"]), [(x, 1.0) for x in probes]),
    ]
    worst = 0.0
    for _, f, pairs in rows:
        for x, expected in pairs:
            worst = max(worst, abs(f([x]) - expected))
    # the epsilon term must be present exactly, not lost in rounding
    eps_exact = objective(["0T", "1T", "1F"])([0.0]) == 1.0 + EPS
    verdict(3, worst <= 1e-12 and eps_exact,
            f"max |error| {worst:.3g} over 4 snapshots, epsilon term exact: {eps_exact}")


# -- 4: Basinhopping on the two-basin example -------------------------------

def _two_basin(x):
    x = x[0]
    return ((x + 1) ** 2 - 4) ** 2 if x <= 1 else (x * x - 4) ** 2


def test_criterion_4_basinhopping_example():
    t0 = time.perf_counter()
    good = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        x0 = rng.uniform(-10.0, 10.0, 1)
        res = mcmc_minimize(_two_basin, x0, rng=rng)
        x = res.x_star[0]
        if res.f_star <= 1e-6 and min(abs(x - m) for m in (-3.0, 1.0, 2.0)) <= 1e-3:
            good += 1
    elapsed = time.perf_counter() - t0
    verdict(4, good >= 48 and elapsed < 10, f"{good}/50 runs reached a minimum, {elapsed:.2f}s")


# -- 5: end-to-end tanh -----------------------------------------------------

def test_criterion_5_tanh_full_coverage():
    typed = load(benchmark_source("tanh"), "tanh")
    results = []
    for seed in (1, 2, 3):
        suite = generate_tests(typed, cfg=DriverConfig(seed=seed, wall_budget=60.0, n_start=500))
        rep = suite.report()
        results.append((seed, rep.branch_pct, suite.starts, round(suite.wall_time, 2)))
    ok = all(pct == 100.0 and starts <= 500 and t < 60 for _, pct, starts, t in results)
    detail = "; ".join(f"seed {s}: {p:.1f}% in {n} starts, {t}s" for s, p, n, t in results)
    verdict(5, ok, detail)


# -- 6: infeasible-branch heuristic -----------------------------------------

def test_criterion_6_infeasible_heuristic():
    kcos = generate_tests(benchmark_source("kernel_cos"), "kernel_cos", cfg=DriverConfig(seed=0))
    krep = kcos.report()
    neg = generate_tests(fixture_source("foo_neg.fpc"), "foo", cfg=DriverConfig(seed=0))
    nrep = neg.report()
    ok = (len(krep.infeasible) == 1 and krep.branch_pct == 87.5
          and krep.branches_covered == 7 and krep.branches_total == 8
          and nrep.infeasible == ["1T"])
    verdict(6, ok, f"kernel_cos {krep.branches_covered}/{krep.branches_total} = {krep.branch_pct}% "
                   f"flagged {krep.infeasible}; y == -1 example flagged {nrep.infeasible}")


# -- 7: generator versus random testing -------------------------------------

def test_criterion_7_generator_beats_random():
    t0 = time.perf_counter()
    report = run_benchmark_suite(BENCHMARKS, DriverConfig(seed=1, wall_budget=5.0), rand_factor=10.0)
    elapsed = time.perf_counter() - t0
    rows = report.ok_rows
    mean = report.mean()
    print(report.to_text())
    gap = mean["generator_pct"] - mean["rand_pct"]
    ok = len(rows) >= 8 and len(rows) == len(report.rows) and gap >= 25.0 and elapsed < 900
    verdict(7, ok, f"{len(rows)} benchmarks, generator {mean['generator_pct']:.1f}% vs random "
                   f"{mean['rand_pct']:.1f}%, gap {gap:.1f}pp (need 25), {elapsed:.0f}s")


# -- 8: determinism of the cover command ------------------------------------

def test_criterion_8_cover_json_is_deterministic(capsys):
    same = []
    for name in ("tanh", "cosh", "kernel_cos"):
        argv = ["cover", str(BENCHMARKS / f"{name}.fpc"), "--entry", name, "--seed", "5",
                "--wall-budget", "120", "--format", "json"]
        outs = []
        for _ in range(2):
            main(argv)
            outs.append(capsys.readouterr().out.encode())
        json.loads(outs[0])
        same.append(outs[0] == outs[1])
    verdict(8, all(same), f"byte-identical JSON on 3 benchmarks: {same}")


# -- 9: saturation versus brute force ---------------------------------------

def _random_dag(rnd: random.Random):
    """Random DAG CFG with up to 6 conditionals; node n is the exit."""
    n = rnd.randint(3, 14)
    k = rnd.randint(1, min(6, n - 1))
    conds = set(rnd.sample(range(n - 1), k))
    edges = []
    label = 0
    for v in range(n):
        if v in conds and v < n - 1:
            t, f = rnd.randint(v + 1, n), rnd.randint(v + 1, n)
            edges.append((v, t, BranchId(label, True)))
            edges.append((v, f, BranchId(label, False)))
            label += 1
        else:
            edges.append((v, rnd.randint(v + 1, n), None))
    return CFG(0, n, edges, nodes=range(n + 1))


def _brute_saturated(cfg: CFG, covered):
    """Saturation by explicit path enumeration: b is saturated iff b is covered and
    every branch on every path that starts by taking b is covered."""
    def paths_from(node):
        succ = cfg.succ.get(node, [])
        if not succ:
            yield ()
            return
        for dst, lab in succ:
            for rest in paths_from(dst):
                yield ((lab,) if lab is not None else ()) + rest

    out = set()
    for b, (_, dst) in cfg.branch_edges.items():
        if b not in covered:
            continue
        below = {lab for path in paths_from(dst) for lab in path}
        if below <= covered:
            out.add(b)
    return frozenset(out)


def test_criterion_9_saturation_matches_brute_force():
    rnd = random.Random(9)
    mismatches = trials = 0
    for _ in range(100):
        cfg = _random_dag(rnd)
        universe = frozenset(cfg.branch_edges)
        for _ in range(10):
            covered = frozenset(b for b in universe if rnd.random() < 0.6)
            trials += 1
            state = replace(CoverageState(cfg, universe), covered=covered)
            if recompute_saturation(state) != _brute_saturated(cfg, covered):
                mismatches += 1
    verdict(9, mismatches == 0, f"100 CFGs, {trials} covered sets, {mismatches} mismatches")
