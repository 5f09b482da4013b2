"""Monotone iteration x_m = K(H(x_{m-1})) started from the upper solution.

H is the shifted right-hand side (beta - delta) p(s) - H p(s - sigma) + rho p(s - r) e^{-p(s - r)}
and K the exponentially weighted integral int_{-inf}^t e^{-beta (t - s)} (.) ds.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from nicholson import MonotonicityBreach
from nicholson.bounds import lower_from, upper_from
from nicholson.model import DerivedConstants, ModelParams
from nicholson.profile import GridSpec, Profile, exp_weighted_nondecreasing, sample, sup_diff

logger = logging.getLogger("nicholson.iterate")

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
DEFAULT_SAVE = 4
ORDER_SLACK = 1e-10     # times kappa
EXP_RTOL = 1e-8
EXP_ATOL = 1e-12        # times kappa
GAP_SLACK = 1e-12       # relative, for the nonincreasing-gap flag


def apply_operator_H(p: Profile, params: ModelParams, beta: float) -> np.ndarray:
    """Node values of (beta - delta) p(s) - H p(s - sigma) + rho p(s - r) e^{-p(s - r)}."""
    x_r = p.lagged(params.r)
    return ((beta - params.delta) * p.values
            - params.harvest * p.lagged(params.sigma)
            + params.rho * x_r * np.exp(-x_r))


def integrator_weights(beta: float, h: float) -> tuple[float, float, float]:
    """(a, w0, w1) of the exponential integrator, exact for piecewise-linear integrands."""
    bh = beta * h
    a = math.exp(-bh)
    one_minus_a = -math.expm1(-bh)
    scale = beta * beta * h
    w0 = (one_minus_a - a * bh) / scale
    w1 = (bh - one_minus_a) / scale
    return a, w0, w1


def convolve(hvals: np.ndarray, beta: float, spec: GridSpec, left_rate: float,
             right_limit: float | None = None, left_anchor: float | None = None) -> Profile:
    """x(t) = int_{-inf}^t e^{-beta (t - s)} H(s) ds on the nodes of spec.

    Below t_min H is modelled as H(t_min) e^{left_rate (s - t_min)}, which seeds
    x(t_min) = H(t_min)/(beta + left_rate). Then x_{i+1} = a x_i + w0 H_i + w1 H_{i+1}.
    left_anchor is handed to the result unchanged.
    """
    hvals = np.asarray(hvals, dtype=float)
    a, w0, w1 = integrator_weights(beta, spec.h)
    x0 = hvals[0] / (beta + left_rate)
    tail, _ = lfilter([w1, w0], [1.0, -a], hvals[1:], zi=[w0 * hvals[0] + a * x0])
    values = np.concatenate([[x0], tail])
    limit = float(values[-1]) if right_limit is None else right_limit
    return Profile(spec, values, left_rate, limit, left_anchor)


def tail_budget(h_left: float, beta: float, lam: float) -> float:
    """Worst-case error committed by the pure-exponential left seed."""
    return abs(h_left) * (1.0 / beta - 1.0 / (beta + lam))


def step(p: Profile, params: ModelParams, beta: float) -> Profile:
    return convolve(apply_operator_H(p, params, beta), beta, p.spec, p.left_rate, p.right_limit,
                    p.left_anchor)


def fixed_point_residual(p: Profile, params: ModelParams, beta: float) -> float:
    """sup |K(H(p)) - p| over the nodes."""
    return sup_diff(step(p, params, beta), p)


# ── Iteration ───────────────────────────────────────────────────────────────

@dataclass
class StepCheck:
    step: int
    ordered: bool = True        # lower <= x_m <= x_{m-1}
    monotone: bool = True       # x_m nondecreasing
    p3: bool | None = None      # e^{beta t}(x_{m-1} - x_m) nondecreasing
    p4: bool | None = None      # e^{beta t}(x_m - lower) nondecreasing


@dataclass
class IterationResult:
    final: Profile
    gaps: list[float] = field(default_factory=list)
    steps: int = 0
    p_checks: list[StepCheck] = field(default_factory=list)
    converged: bool = False
    saved: list[Profile] = field(default_factory=list)
    tail_budget: float = 0.0

    @property
    def gaps_nonincreasing(self) -> bool:
        return all(b <= a * (1.0 + GAP_SLACK) for a, b in zip(self.gaps, self.gaps[1:]))

    @property
    def all_ordered(self) -> bool:
        return all(c.ordered and c.monotone for c in self.p_checks)

    def summary(self) -> dict:
        return {
            "steps": self.steps,
            "converged": self.converged,
            "gaps": list(self.gaps),
            "gaps_nonincreasing": self.gaps_nonincreasing,
            "tail_budget": self.tail_budget,
            "p3_failures": [c.step for c in self.p_checks if c.p3 is False],
            "p4_failures": [c.step for c in self.p_checks if c.p4 is False],
        }


def _first_violation(margin: np.ndarray, slack: float) -> int | None:
    bad = np.flatnonzero(margin < -slack)
    return int(bad[0]) if bad.size else None


def _check_step(m: int, prev: Profile, x: Profile, lower: np.ndarray, beta: float,
                kappa: float, exponential_checks: bool) -> StepCheck:
    spec = x.spec
    slack = ORDER_SLACK * kappa
    for margin, what in ((x.values - lower, "iterate fell below the lower solution"),
                         (prev.values - x.values, "iterate rose above its predecessor"),
                         (np.diff(x.values), "iterate lost monotonicity")):
        i = _first_violation(margin, slack)
        if i is not None:
            t = float(spec.nodes[i])
            logger.error("%s at step %d, t=%.6g (by %.3e)", what, m, t, -margin[i])
            raise MonotonicityBreach(what, step=m, node=i, t=t)

    check = StepCheck(step=m)
    if exponential_checks:
        atol = EXP_ATOL * kappa
        check.p3, j3, _ = exp_weighted_nondecreasing(prev.values - x.values, beta, spec.h,
                                                      rtol=EXP_RTOL, atol=atol)
        check.p4, j4, _ = exp_weighted_nondecreasing(x.values - lower, beta, spec.h,
                                                      rtol=EXP_RTOL, atol=atol)
        if not check.p3:
            logger.warning("step %d: e^{beta t}(x_{m-1} - x_m) decreases near t=%.6g",
                           m, spec.nodes[j3])
        if not check.p4:
            logger.warning("step %d: e^{beta t}(x_m - lower) decreases near t=%.6g",
                           m, spec.nodes[j4])
    return check


def iterate(params: ModelParams, consts: DerivedConstants, spec: GridSpec,
            tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
            exponential_checks: bool = False, initial: Profile | None = None,
            save: int = DEFAULT_SAVE) -> IterationResult:
    """Run the monotone scheme from the sampled upper solution (or `initial`).

    The left tail below t_min stays pinned at x_0(t_min) for every iterate; it is
    never rebuilt from x_m(t_min), whose nonlinear deficit would translate the profile.

    Every step is checked against lower <= x_m <= x_{m-1} and monotonicity with
    slack 1e-10 kappa; a violation raises MonotonicityBreach. Stops when the
    sup-norm gap drops below tol or after max_iter steps.
    """
    params.require_admissible()
    spec.require_aligned(params.sigma, params.r)
    beta, kappa, lam = consts.beta, consts.kappa, consts.lam

    x = initial if initial is not None else sample(upper_from(consts), spec, lam, kappa)
    if x.left_anchor is None:
        x = x.anchored()
    if 0 < consts.epsilon < lam and consts.alpha > 0:
        lower = np.asarray(lower_from(consts)(spec.nodes), dtype=float)
    else:
        lower = np.zeros(spec.n + 1)

    result = IterationResult(final=x, saved=[x] if save > 0 else [])
    for m in range(1, max_iter + 1):
        hvals = apply_operator_H(x, params, beta)
        nxt = convolve(hvals, beta, spec, x.left_rate, x.right_limit, x.left_anchor)
        result.p_checks.append(_check_step(m, x, nxt, lower, beta, kappa, exponential_checks))

        gap = sup_diff(nxt, x)
        if result.gaps and gap > result.gaps[-1] * (1.0 + GAP_SLACK):
            logger.warning("gap grew at step %d: %.3e > %.3e", m, gap, result.gaps[-1])
        result.gaps.append(gap)
        result.tail_budget = tail_budget(hvals[0], beta, x.left_rate)
        result.steps = m
        x = nxt
        if len(result.saved) < save:
            result.saved.append(x)
        logger.debug("step %d: gap %.3e", m, gap)
        if gap < tol:
            result.converged = True
            break

    result.final = x
    if result.converged:
        logger.info("converged in %d steps (gap %.3e)", result.steps, result.gaps[-1])
    elif max_iter > 0:
        logger.warning("no convergence after %d steps (gap %.3e, tol %.1e)",
                       result.steps, result.gaps[-1], tol)
    return result
