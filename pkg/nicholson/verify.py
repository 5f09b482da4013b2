"""Independent checks that a profile solves the delay equation."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from nicholson import BlowUpError, CheckReport, GridError
from nicholson.model import ModelParams, delay_rhs
from nicholson.profile import ALIGN_TOL, Profile

logger = logging.getLogger("nicholson.verify")

FLAT_SPAN = 5.0
MONOTONE_SLACK = 1e-10  # times kappa
GROWTH_LIMIT = 10.0


@dataclass(frozen=True)
class ResidualReport:
    sup_residual: float
    argmax_t: float
    endpoint_errors: tuple[float, float]

    def to_dict(self) -> dict:
        return {"sup_residual": self.sup_residual, "argmax_t": self.argmax_t,
                "endpoint_error_left": self.endpoint_errors[0],
                "endpoint_error_right": self.endpoint_errors[1]}


def dde_residual(p: Profile, params: ModelParams) -> ResidualReport:
    """sup over interior nodes of |-x' + f(x_t)|, with x' by central differences.

    Endpoint errors are |x(t_min)| and |x(t_max) - right_limit|.
    """
    v = p.values
    h = p.spec.h
    deriv = (v[2:] - v[:-2]) / (2.0 * h)
    rhs = delay_rhs(params, v, p.lagged(params.sigma), p.lagged(params.r))[1:-1]
    res = np.abs(rhs - deriv)
    i = int(np.argmax(res))
    report = ResidualReport(sup_residual=float(res[i]), argmax_t=float(p.spec.nodes[i + 1]),
                            endpoint_errors=(abs(float(v[0])), abs(float(v[-1]) - p.right_limit)))
    logger.debug("dde residual %.3e at t=%.4f", report.sup_residual, report.argmax_t)
    return report


# ── Forward integration ─────────────────────────────────────────────────────

@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray


def _delay_steps(delay: float, dt: float) -> int:
    k = delay / dt
    if abs(k - round(k)) > ALIGN_TOL or round(k) < 1:
        raise GridError(f"dt={dt} does not divide delay {delay}")
    return int(round(k))


def method_of_steps(history: Profile, params: ModelParams, t_start: float, t_end: float,
                    dt: float) -> Trajectory:
    """Classical RK4 for the delay equation on [t_start, t_end].

    The state for t <= t_start is read from `history`. Delayed values at half
    steps are linear interpolations of the stored solution; dt must divide
    both delays so full-step lookups land on stored points.
    """
    if not t_end > t_start:
        raise GridError(f"t_end={t_end} must exceed t_start={t_start}")
    ks, kr = _delay_steps(params.sigma, dt), _delay_steps(params.r, dt)
    n = int(round((t_end - t_start) / dt))

    past = t_start + dt * np.arange(-kr, 1)
    x = np.empty(kr + 1 + n)
    x[:kr + 1] = history(past)

    def f(state, xs, xr):
        return float(delay_rhs(params, state, xs, xr))

    for c in range(kr, kr + n):
        xs0, xs1 = x[c - ks], x[c - ks + 1]
        xr0, xr1 = x[c - kr], x[c - kr + 1]
        xsm, xrm = 0.5 * (xs0 + xs1), 0.5 * (xr0 + xr1)
        cur = x[c]
        k1 = f(cur, xs0, xr0)
        k2 = f(cur + 0.5 * dt * k1, xsm, xrm)
        k3 = f(cur + 0.5 * dt * k2, xsm, xrm)
        k4 = f(cur + dt * k3, xs1, xr1)
        x[c + 1] = cur + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not math.isfinite(x[c + 1]):
            t_bad = t_start + (c + 1 - kr) * dt
            logger.error("forward integration blew up at t=%.6g", t_bad)
            raise BlowUpError(f"non-finite state at t={t_bad:.6g}")

    return Trajectory(t=t_start + dt * np.arange(n + 1), x=x[kr:].copy())


@dataclass(frozen=True)
class CrossCheck:
    trajectory: Trajectory
    max_deviation: float
    argmax_t: float
    growth: float

    def to_dict(self) -> dict:
        return {"max_deviation": self.max_deviation, "argmax_t": self.argmax_t,
                "growth": self.growth}


def cross_check(p: Profile, params: ModelParams, t_start: float = 0.0, t_end: float = 10.0,
                dt: float | None = None) -> CrossCheck:
    """Integrate forward from p's own history and compare with p.

    growth is the largest deviation on the second half of the window over the
    largest on the first half.
    """
    dt = p.spec.h / 2.0 if dt is None else dt
    traj = method_of_steps(p, params, t_start, t_end, dt)
    dev = np.abs(traj.x - p(traj.t))
    i = int(np.argmax(dev))
    half = len(dev) // 2
    first = float(np.max(dev[:half + 1]))
    second = float(np.max(dev[half:]))
    growth = second / first if first > 0 else (0.0 if second == 0 else math.inf)
    logger.info("method of steps deviates by %.3e (t=%.3f), growth %.2f", dev[i], traj.t[i], growth)
    return CrossCheck(trajectory=traj, max_deviation=float(dev[i]), argmax_t=float(traj.t[i]),
                      growth=growth)


# ── Limits ──────────────────────────────────────────────────────────────────

def asymptotic_check(p: Profile, kappa: float, tol_left: float, tol_right: float) -> CheckReport:
    report = CheckReport()
    v = p.values
    t_max = p.spec.t_max
    report.add("limit-left", tol_left - abs(v[0]), f"|x(t_min)| <= {tol_left:g}")
    report.add("limit-right", tol_right - abs(v[-1] - kappa), f"|x(t_max) - kappa| <= {tol_right:g}")
    drift = abs(v[-1] - float(p(t_max - FLAT_SPAN)))
    report.add("flatness", tol_right - drift, f"|x(t_max) - x(t_max - {FLAT_SPAN:g})| <= {tol_right:g}")
    return report


def monotone_check(p: Profile, kappa: float) -> CheckReport:
    report = CheckReport()
    steps = np.diff(p.values)
    i = int(np.argmin(steps))
    report.add("monotone", steps[i] + MONOTONE_SLACK * kappa, "x nondecreasing",
               detail=f"worst t={p.spec.nodes[i]:.6g}")
    return report


def cross_check_report(cc: CrossCheck, tol: float) -> CheckReport:
    report = CheckReport()
    report.add("cross-deviation", tol - cc.max_deviation, f"max |mos - x| <= {tol:g}",
               detail=f"t={cc.argmax_t:.6g}")
    report.add("cross-growth", GROWTH_LIMIT - cc.growth, f"deviation growth <= {GROWTH_LIMIT:g}")
    return report
