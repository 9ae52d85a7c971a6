"""Derivative-free minimization: Powell local search inside a Basinhopping chain.

The objectives minimized here are piecewise, flat in places and may
return +inf, so the line search is written to tolerate infinities and
NaNs (NaN is treated as +inf) and to let the step grow until the
argument itself overflows. Reaching ``target`` aborts the search at once.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

_GOLD = 1.618034
_CGOLD = 0.3819660
_GROW_LIMIT = 110.0
_TINY = 1e-21
_BRACKET_MAXITER = 1000
_BRENT_MAXITER = 200
_ALPHA_FLOOR = 1e-30
_ULP_FACTOR = 4.0 * 2.0**-52


@dataclass(frozen=True)
class LocalMinConfig:
    ftol: float = 1e-8
    xtol: float = 1e-8
    max_iter: int = 100
    direction_scale: float = 0.1

    def __post_init__(self):
        if not (self.ftol > 0 and self.xtol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.direction_scale >= 0:
            raise ValueError("direction_scale must be non-negative")


@dataclass(frozen=True)
class McmcConfig:
    n_iter: int = 5
    step_size: float = 0.5
    temperature: float = 1.0
    seed: Optional[int] = None
    literal_last_sample: bool = False

    def __post_init__(self):
        if self.n_iter < 0:
            raise ValueError("n_iter must be non-negative")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


@dataclass
class MinimizeResult:
    x_star: np.ndarray
    f_star: float
    evaluations: int = 0
    accepted: int = 0
    stopped_early: bool = False
    timed_out: bool = False


class _Reached(Exception):
    pass


class _TimedOut(Exception):
    pass


class _Counted:
    """Objective wrapper: NaN to +inf, evaluation count, best point, early exits."""

    def __init__(self, f, target, deadline):
        self.f = f
        self.target = target
        self.deadline = deadline
        self.n = 0
        self.best_x = None
        self.best_f = math.inf

    def __call__(self, x: np.ndarray) -> float:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise _TimedOut()
        self.n += 1
        fx = float(self.f(x))
        if fx != fx:
            fx = math.inf
        if self.best_x is None or fx < self.best_f:
            self.best_x = x.copy()
            self.best_f = fx
        if self.target is not None and fx <= self.target:
            raise _Reached()
        return fx


def _step(x, alpha, d, mask):
    # x + alpha*d restricted to the nonzero entries of d, so that an
    # infinite alpha never produces 0*inf
    y = x.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        y[mask] = x[mask] + alpha * d[mask]
    return y


def _bracket(phi, fa):
    xa, xb = 0.0, 1.0
    fb = phi(xb)
    if fa < fb:
        xa, xb, fa, fb = xb, xa, fb, fa
    xc = xb + _GOLD * (xb - xa)
    fc = phi(xc)
    it = 0
    while fc < fb and it < _BRACKET_MAXITER:
        it += 1
        if not math.isfinite(xc):
            break
        tmp1 = (xb - xa) * (fb - fc)
        tmp2 = (xb - xc) * (fb - fa)
        val = tmp2 - tmp1
        denom = 2.0 * _TINY if abs(val) < _TINY else 2.0 * val
        w = xb - ((xb - xc) * tmp2 - (xb - xa) * tmp1) / denom
        wlim = xb + _GROW_LIMIT * (xc - xb)
        if not math.isfinite(w):
            w = xc + _GOLD * (xc - xb)
            fw = phi(w)
        elif (w - xc) * (xb - w) > 0.0:
            fw = phi(w)
            if fw < fc:
                return xb, w, xc, fb, fw, fc
            if fw > fb:
                return xa, xb, w, fa, fb, fw
            w = xc + _GOLD * (xc - xb)
            fw = phi(w)
        elif (w - wlim) * (wlim - xc) >= 0.0:
            w = wlim
            fw = phi(w)
        elif (w - wlim) * (xc - w) > 0.0:
            fw = phi(w)
            if fw < fc:
                xb, xc, w = xc, w, w + _GOLD * (w - xc)
                fb, fc, fw = fc, fw, phi(w)
        else:
            w = xc + _GOLD * (xc - xb)
            fw = phi(w)
        xa, xb, xc = xb, xc, w
        fa, fb, fc = fb, fc, fw
    return xa, xb, xc, fa, fb, fc


def _brent(phi, xa, xb, xc, fb, xtol, scale):
    a, b = (xa, xc) if xa < xc else (xc, xa)
    x = w = v = xb
    fx = fw = fv = fb
    deltax = 0.0
    rat = 0.0
    # absolute floor at a few ulps of the current point, so repeated
    # sweeps can settle on exact roots of equality branches
    floor = _ULP_FACTOR * scale + _ALPHA_FLOOR
    for _ in range(_BRENT_MAXITER):
        tol1 = xtol * abs(x) + floor
        tol2 = 2.0 * tol1
        xmid = 0.5 * (a + b)
        if abs(x - xmid) < (tol2 - 0.5 * (b - a)):
            break
        if abs(deltax) <= tol1:
            deltax = a - x if x >= xmid else b - x
            rat = _CGOLD * deltax
        else:
            tmp1 = (x - w) * (fx - fv)
            tmp2 = (x - v) * (fx - fw)
            p = (x - v) * tmp2 - (x - w) * tmp1
            tmp2 = 2.0 * (tmp2 - tmp1)
            if tmp2 > 0.0:
                p = -p
            tmp2 = abs(tmp2)
            dx_temp = deltax
            deltax = rat
            if p > tmp2 * (a - x) and p < tmp2 * (b - x) and abs(p) < abs(0.5 * tmp2 * dx_temp):
                rat = p / tmp2
                u = x + rat
                if (u - a) < tol2 or (b - u) < tol2:
                    rat = tol1 if xmid - x >= 0 else -tol1
            else:
                deltax = a - x if x >= xmid else b - x
                rat = _CGOLD * deltax
        if abs(rat) < tol1:
            u = x + tol1 if rat >= 0 else x - tol1
        else:
            u = x + rat
        fu = phi(u)
        if fu > fx:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, w, fv, fw = w, u, fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
        else:
            if u >= x:
                a = x
            else:
                b = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
    return x, fx


def _line_search(fun, x, fx, d, xtol):
    """Minimize ``fun`` along ``x + alpha*d``; returns (f, x, alpha*d)."""
    mask = d != 0
    if not mask.any():
        return fx, x, np.zeros_like(d)
    cache = {0.0: fx}

    def phi(alpha):
        if alpha != alpha:
            return math.inf
        if alpha in cache:
            return cache[alpha]
        value = fun(_step(x, alpha, d, mask))
        cache[alpha] = value
        return value

    xa, xb, xc, fa, fb, fc = _bracket(phi, fx)
    best_a, best_f = min(((xa, fa), (xb, fb), (xc, fc)), key=lambda p: p[1])
    if all(math.isfinite(v) for v in (xa, xb, xc, fb)) and fb <= fa and fb <= fc:
        scale = float(np.max(np.abs(x[mask]))) / float(np.max(np.abs(d[mask])))
        alpha, falpha = _brent(phi, xa, xb, xc, fb, xtol, scale if math.isfinite(scale) else 0.0)
        if falpha <= best_f:
            best_a, best_f = alpha, falpha
    if not best_f < fx:
        return fx, x, np.zeros_like(d)
    step = np.zeros_like(d)
    with np.errstate(over="ignore", invalid="ignore"):
        step[mask] = best_a * d[mask]
    return best_f, _step(x, best_a, d, mask), step


def _converged(f0, f1, ftol):
    if f0 == f1:
        return True
    if math.isfinite(f0) and math.isfinite(f1):
        return 2.0 * (f0 - f1) <= ftol * (abs(f0) + abs(f1)) + 1e-300
    return False


def _powell(fun, x0, cfg: LocalMinConfig):
    n = x0.size
    x = x0.copy()
    fval = fun(x)
    # unit directions, lengthened for large coordinates so the first
    # bracket step can leave plateaus of bit-level thresholds
    direc = np.diag(np.maximum(1.0, cfg.direction_scale * np.abs(x0)))
    x1 = x.copy()
    for _ in range(cfg.max_iter):
        fx = fval
        bigind = 0
        delta = 0.0
        for i in range(n):
            fx2 = fval
            fval, x, _ = _line_search(fun, x, fval, direc[i], cfg.xtol)
            gain = fx2 - fval
            if gain > delta:
                delta, bigind = gain, i
        if _converged(fx, fval, cfg.ftol):
            break
        if not np.all(np.isfinite(x)):
            break
        with np.errstate(over="ignore", invalid="ignore"):
            direc1 = x - x1
            x2 = 2.0 * x - x1
        x1 = x.copy()
        if not (np.all(np.isfinite(x2)) and np.any(direc1 != 0)):
            continue
        fx2 = fun(x2)
        if fx > fx2 and all(math.isfinite(v) for v in (fx, fx2, fval, delta)):
            t = 2.0 * (fx + fx2 - 2.0 * fval)
            temp = fx - fval - delta
            t *= temp * temp
            temp = fx - fx2
            t -= delta * temp * temp
            if t < 0.0:
                fval, x, direc1 = _line_search(fun, x, fval, direc1, cfg.xtol)
                if np.any(direc1 != 0) and np.all(np.isfinite(direc1)):
                    direc[bigind] = direc[-1]
                    direc[-1] = direc1
    return x, fval


def _check_start(x0) -> np.ndarray:
    x = np.array(x0, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty starting point")
    if not np.all(np.isfinite(x)):
        raise ValueError("starting point must be finite")
    return x


def local_minimize(f: Callable, x0: Sequence[float], cfg: LocalMinConfig = LocalMinConfig(),
                   target: Optional[float] = None, deadline: Optional[float] = None) -> MinimizeResult:
    """Powell's conjugate-direction method from ``x0``.

    ``target``: stop as soon as a value <= target is seen.
    ``deadline``: ``time.monotonic()`` value after which the search gives up.
    """
    x0 = _check_start(x0)
    fun = _Counted(f, target, deadline)
    return _run_local(fun, x0, cfg)


def _run_local(fun: _Counted, x0, cfg) -> MinimizeResult:
    start = fun.n
    fun.best_x, fun.best_f = None, math.inf
    stopped = timed_out = False
    try:
        x, fx = _powell(fun, x0, cfg)
    except _Reached:
        stopped = True
    except _TimedOut:
        timed_out = True
    if stopped or timed_out or fun.best_f < fx:
        x, fx = fun.best_x, fun.best_f
    if x is None:  # timed out before the first evaluation
        x, fx = x0.copy(), math.inf
    return MinimizeResult(x, fx, fun.n - start, 0, stopped, timed_out)


def propose_perturbation(rng, dim: int, step: float) -> np.ndarray:
    """I.i.d. uniform displacement on [-step, step] per coordinate."""
    if dim < 1:
        raise ValueError("dim must be at least 1")
    return rng.uniform(-step, step, size=dim)


def _accept_probability(f_cur: float, f_new: float, temperature: float) -> float:
    if f_new < f_cur:
        return 1.0
    if math.isinf(f_new):
        return 0.0
    return math.exp((f_cur - f_new) / temperature)


def mcmc_minimize(f: Callable, x0: Sequence[float], lm: LocalMinConfig = LocalMinConfig(),
                  mc: McmcConfig = McmcConfig(), stop: Optional[Callable] = None,
                  target: Optional[float] = None, deadline: Optional[float] = None,
                  rng=None) -> MinimizeResult:
    """Basinhopping: local minimization, then ``n_iter`` perturb-and-minimize
    rounds with Metropolis acceptance. Returns the best point seen unless
    ``mc.literal_last_sample`` is set, in which case the chain's current
    point is returned.

    ``stop(x, f)`` is checked after every local minimization.
    """
    x0 = _check_start(x0)
    if rng is None:
        rng = np.random.default_rng(mc.seed)
    fun = _Counted(f, target, deadline)
    res = _run_local(fun, x0, lm)
    x_cur, f_cur = res.x_star, res.f_star
    x_best, f_best = x_cur, f_cur
    accepted = 0
    stopped = res.stopped_early or (stop is not None and stop(x_cur, f_cur))
    timed_out = res.timed_out
    k = 0
    while not (stopped or timed_out) and k < mc.n_iter:
        k += 1
        delta = propose_perturbation(rng, x0.size, mc.step_size)
        with np.errstate(over="ignore", invalid="ignore"):
            start = x_cur + delta
        if not np.all(np.isfinite(start)):
            start = np.where(np.isfinite(start), start, x0 + delta)
        res = _run_local(fun, start, lm)
        m = rng.uniform()
        if m < _accept_probability(f_cur, res.f_star, mc.temperature):
            x_cur, f_cur = res.x_star, res.f_star
            accepted += 1
        if res.f_star < f_best:
            x_best, f_best = res.x_star, res.f_star
        stopped = res.stopped_early or (stop is not None and stop(res.x_star, res.f_star))
        timed_out = res.timed_out
    if mc.literal_last_sample and not (stopped or timed_out):
        x_best, f_best = x_cur, f_cur
    return MinimizeResult(np.array(x_best, dtype=float), float(f_best), fun.n, accepted,
                          bool(stopped), bool(timed_out))
