"""Analytic upper and lower solutions, their residuals, and the certificates built on them."""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from nicholson import CheckReport, KinkError, ParameterError
from nicholson.model import DerivedConstants, ModelParams, delay_rhs
from nicholson.profile import GridSpec, exp_weighted_nondecreasing

logger = logging.getLogger("nicholson.bounds")

DEFAULT_S_SAMPLES = (0.1, 1.0, 5.0)
FAR_FIELD = 1000.0
REL_TOL = 1e-10
ABS_FLOOR = 1e-12       # times kappa, absorbs rounding of differences near the limits


@dataclass(frozen=True)
class UpperSolution:
    """kappa mu/(mu+lambda) e^{lambda t} for t <= 0, kappa (1 - lambda/(mu+lambda) e^{-mu t}) after."""
    kappa: float
    lam: float
    mu: float

    @property
    def kinks(self) -> tuple[float, ...]:
        return (0.0,)

    @property
    def junction(self) -> float:
        return self.kappa * self.mu / (self.mu + self.lam)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        left = self.junction * np.exp(self.lam * np.minimum(t, 0.0))
        right = self.kappa * (1.0 - self.lam / (self.mu + self.lam)
                              * np.exp(-self.mu * np.maximum(t, 0.0)))
        out = np.where(t <= 0.0, left, right)
        return float(out) if out.ndim == 0 else out

    __call__ = value

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        left = self.lam * self.junction * np.exp(self.lam * np.minimum(t, 0.0))
        right = (self.kappa * self.lam * self.mu / (self.mu + self.lam)
                 * np.exp(-self.mu * np.maximum(t, 0.0)))
        out = np.where(t <= 0.0, left, right)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LowerSolution:
    """alpha (1 - e^{eps (t - t0)}) e^{lambda t} for t <= t0, zero after."""
    alpha: float
    eps: float
    lam: float
    t0: float

    def __post_init__(self):
        if not self.t0 < 0:
            raise ParameterError(f"lower-solution cutoff t0 must be negative, got {self.t0}")

    @property
    def kinks(self) -> tuple[float, ...]:
        return (self.t0,)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        s = np.minimum(t, self.t0)
        left = self.alpha * (1.0 - np.exp(self.eps * (s - self.t0))) * np.exp(self.lam * s)
        out = np.where(t <= self.t0, left, 0.0)
        return float(out) if out.ndim == 0 else out

    __call__ = value

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        s = np.minimum(t, self.t0)
        grow = np.exp(self.eps * (s - self.t0))
        left = self.alpha * (self.lam * (1.0 - grow) - self.eps * grow) * np.exp(self.lam * s)
        out = np.where(t <= self.t0, left, 0.0)
        return float(out) if out.ndim == 0 else out


def upper_from(consts: DerivedConstants) -> UpperSolution:
    return UpperSolution(kappa=consts.kappa, lam=consts.lam, mu=consts.beta)


def lower_from(consts: DerivedConstants) -> LowerSolution:
    return LowerSolution(alpha=consts.alpha, eps=consts.epsilon, lam=consts.lam, t0=consts.t0)


# ── Residuals ───────────────────────────────────────────────────────────────

def _residual(t, sol, params: ModelParams):
    t = np.asarray(t, dtype=float)
    hit = np.isin(t, sol.kinks)
    if np.any(hit):
        raise KinkError(f"residual undefined at kink t={t[hit].flat[0]:.6g}")
    out = -sol.deriv(t) + delay_rhs(params, sol.value(t), sol.value(t - params.sigma),
                                    sol.value(t - params.r))
    return float(out) if np.ndim(out) == 0 else out


def residual_upper(t, u: UpperSolution, params: ModelParams):
    """Phi(t); the upper-solution certificate is Phi <= 0 away from t = 0."""
    return _residual(t, u, params)


def residual_lower(t, l: LowerSolution, params: ModelParams):
    """Psi(t); the lower-solution certificate is Psi >= 0 away from t = t0."""
    return _residual(t, l, params)


def kink_free_nodes(spec: GridSpec, kinks: Sequence[float]) -> np.ndarray:
    """Grid nodes with every node closer than h/2 to a kink removed."""
    nodes = spec.nodes
    keep = np.ones(nodes.shape, dtype=bool)
    for k in kinks:
        keep &= np.abs(nodes - k) >= 0.5 * spec.h
    return nodes[keep]


def residual_on_grid(sol, params: ModelParams, spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    t = kink_free_nodes(spec, sol.kinks)
    return t, np.asarray(_residual(t, sol, params))


def verify_bound(sol, params: ModelParams, spec: GridSpec, tol: float = 1e-9) -> CheckReport:
    """max Phi <= tol for an UpperSolution, min Psi >= -tol for a LowerSolution."""
    t, res = residual_on_grid(sol, params, spec)
    report = CheckReport()
    if isinstance(sol, UpperSolution):
        i = int(np.argmax(res))
        report.add("upper-residual", tol - res[i], f"max Phi <= {tol:g}",
                   detail=f"argmax t={t[i]:.6g}, Phi={res[i]:.6e}")
    else:
        i = int(np.argmin(res))
        report.add("lower-residual", res[i] + tol, f"min Psi >= -{tol:g}",
                   detail=f"argmin t={t[i]:.6g}, Psi={res[i]:.6e}")
        # Psi vanishes identically once t - r passes t0; the positive branch is t < t0
        branch = np.flatnonzero(t < sol.t0)
        if branch.size:
            j = int(branch[np.argmin(res[branch])])
            report.add("lower-residual-branch", res[j] + tol, f"min Psi on t < t0 >= -{tol:g}",
                       detail=f"argmin t={t[j]:.6g}, Psi={res[j]:.6e}")
    logger.info("%s: extremal residual %.3e at t=%.4f", report.items[0].name, res[i], t[i])
    return report


# ── Profile set and compatibility ───────────────────────────────────────────

def check_gamma_membership(p: Callable, beta: float, kappa: float, spec: GridSpec,
                           s_samples: Sequence[float] = DEFAULT_S_SAMPLES,
                           far: float = FAR_FIELD) -> CheckReport:
    """Limits 0 and kappa, monotonicity, and e^{beta t}(p(t+s) - p(t)) nondecreasing.

    Limits are read `far` beyond the window through p's own tail.
    """
    report = CheckReport()
    tol = REL_TOL * kappa
    nodes = spec.nodes
    values = np.asarray(p(nodes), dtype=float)

    left = float(p(spec.t_min - far))
    right = float(p(spec.t_max + far))
    report.add("gamma-limit-left", tol - abs(left), "p(-inf) = 0", detail=f"p={left:.3e}")
    report.add("gamma-limit-right", tol - abs(right - kappa), "p(+inf) = kappa",
               detail=f"p={right:.6g}")

    steps = np.diff(values)
    i = int(np.argmin(steps))
    report.add("gamma-monotone", steps[i] + tol, "p nondecreasing", detail=f"worst t={nodes[i]:.6g}")

    for s in s_samples:
        d = np.asarray(p(nodes + s), dtype=float) - values
        ok, j, margin = exp_weighted_nondecreasing(d, beta, spec.h, rtol=REL_TOL,
                                                   atol=ABS_FLOOR * kappa)
        report.add(f"gamma-exp[s={s:g}]", margin, "e^{beta t}(p(t+s) - p(t)) nondecreasing",
                   detail=f"worst t={nodes[j]:.6g}")
    return report


def check_compatibility(u: UpperSolution, l: LowerSolution, beta: float, kappa: float,
                        spec: GridSpec) -> CheckReport:
    """(C1) 0 <= lower <= upper <= kappa, (C2) lower not identically 0, (C3) weighted gap monotone."""
    report = CheckReport()
    nodes = spec.nodes
    upper, lower = u(nodes), l(nodes)
    slack = REL_TOL * kappa

    report.add("C1-nonneg", float(np.min(lower)) + slack, "0 <= lower")
    gap = upper - lower
    i = int(np.argmin(gap))
    report.add("C1-order", gap[i] + slack, "lower <= upper", detail=f"worst t={nodes[i]:.6g}")
    report.add("C1-cap", float(np.min(kappa - upper)) + slack, "upper <= kappa")
    report.add("C2", float(np.max(lower)), "max lower > 0", strict=True)
    ok, j, margin = exp_weighted_nondecreasing(gap, beta, spec.h, rtol=REL_TOL,
                                               atol=ABS_FLOOR * kappa)
    report.add("C3", margin, "e^{beta t}(upper - lower) nondecreasing",
               detail=f"worst t={nodes[j]:.6g}")
    return report


def weighted_gap(u: UpperSolution, l: LowerSolution, beta: float, t) -> np.ndarray:
    """e^{beta t}(upper - lower), the dashed compatibility curve."""
    t = np.asarray(t, dtype=float)
    return np.exp(beta * t) * (u(t) - l(t))
