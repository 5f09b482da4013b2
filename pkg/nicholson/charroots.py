"""Characteristic quasi-polynomial at the zero equilibrium and the lower-solution windows."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy.optimize import bisect

from nicholson import InfeasibleError, ParameterError

if TYPE_CHECKING:
    from nicholson.model import ModelParams

logger = logging.getLogger("nicholson.charroots")

DEFAULT_ROOT_TOL = 1e-10
SCAN_POINTS = 4096


def chi0(z, params: ModelParams):
    """chi0(z) = -z - delta - H e^{-sigma z} + rho e^{-r z}; scalar or array."""
    return (-z - params.delta
            - params.harvest * np.exp(-params.sigma * z)
            + params.rho * np.exp(-params.r * z))


@dataclass(frozen=True)
class RootResult:
    root: float
    residual: float
    bracket: tuple[float, float]
    iterations: int
    sign_changes: int = 1


def _sign_changes(values: np.ndarray) -> np.ndarray:
    """Indices i where values[i] > 0 >= values[i+1] or the reverse."""
    s = np.sign(values)
    return np.flatnonzero(s[:-1] * s[1:] <= 0)


def find_lambda(params: ModelParams, tol: float = DEFAULT_ROOT_TOL) -> RootResult:
    """Smallest positive root of chi0.

    chi0(0) = rho - delta - H > 0 under (A1) and chi0 < 0 on [rho, inf), so
    every positive root lies in (0, rho]. The first sign change of a uniform
    scan from 0 is bisected.
    """
    at_zero = params.rho - params.delta - params.harvest
    if at_zero <= 0:
        raise InfeasibleError(
            f"(A1) violated: chi0(0) = rho - delta - H = {at_zero:.6g} <= 0, no positive root"
        )

    hi = 1.0
    while chi0(hi, params) >= 0:
        hi *= 2.0

    zs = np.linspace(0.0, hi, SCAN_POINTS + 1)
    k = int(np.argmax(chi0(zs, params) <= 0))
    lo_z, hi_z = float(zs[k - 1]), float(zs[k])

    root, info = bisect(chi0, lo_z, hi_z, args=(params,), xtol=1e-15,
                        maxiter=200, full_output=True)
    residual = abs(float(chi0(root, params)))
    if residual > tol:
        logger.warning("chi0 root residual %.3e exceeds tol %.1e", residual, tol)

    upper = max(hi, params.rho)
    scan = np.linspace(upper / (SCAN_POINTS * 4), upper, SCAN_POINTS * 4)
    n_changes = len(_sign_changes(chi0(scan, params)))
    if n_changes > 1:
        logger.warning("chi0 has %d sign changes on (0, %.4g]; using the smallest root %.10f",
                       n_changes, upper, root)

    logger.debug("lambda = %.12f (bracket [%.6g, %.6g], %d bisections, |chi0| = %.2e)",
                 root, lo_z, hi_z, info.iterations, residual)
    return RootResult(root=float(root), residual=residual, bracket=(lo_z, hi_z),
                      iterations=info.iterations, sign_changes=max(n_changes, 1))


# ── Lower-solution constants ────────────────────────────────────────────────

class EpsilonWindow(NamedTuple):
    lower: float
    upper: float

    @property
    def empty(self) -> bool:
        return self.lower >= self.upper

    def contains(self, eps: float) -> bool:
        return self.lower < eps < self.upper

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


def harvest_dominance_margin(params: ModelParams, lam: float, eps: float) -> float:
    """H e^{-(lambda+eps) sigma} - rho e^{-(lambda+eps) r}."""
    z = lam + eps
    return params.harvest * math.exp(-z * params.sigma) - params.rho * math.exp(-z * params.r)


def epsilon_window(params: ModelParams, lam: float) -> EpsilonWindow:
    """Values of eps in (0, lambda) for which the harvest dominance margin is nonnegative.

    H e^{-z sigma} >= rho e^{-z r} iff z >= ln(rho/H)/(r - sigma), z = lambda + eps.
    """
    if params.rho <= 0 or params.harvest <= 0:
        raise ParameterError("epsilon_window needs rho > 0 and H > 0")
    if params.sigma >= params.r:
        raise ParameterError(f"epsilon_window needs sigma < r (got {params.sigma} >= {params.r})")
    threshold = math.log(params.rho / params.harvest) / (params.r - params.sigma)
    return EpsilonWindow(max(0.0, threshold - lam), lam)


class AlphaBound(NamedTuple):
    amplitude: float
    cap: float

    @property
    def limit(self) -> float:
        return min(self.amplitude, self.cap)


def _check_eps(lam: float, eps: float) -> None:
    if not 0 < eps < lam:
        raise ParameterError(f"eps must lie in (0, lambda) = (0, {lam:.6g}); got {eps:.6g}")


def alpha_bound(params: ModelParams, lam: float, eps: float,
                kappa: float, beta: float) -> AlphaBound:
    """Admissible lower-solution amplitude and the compatibility cap.

    amplitude = (1/rho) min{lambda + delta + harvest_dominance_margin,
                         -chi0(lambda+eps) (lambda+eps)^{(lambda+eps)/eps}
                         / (4 eps^2 (lambda-eps)^{(lambda-eps)/eps})}
    cap     = kappa beta / (lambda + beta)
    """
    _check_eps(lam, eps)
    z = lam + eps
    first = lam + params.delta + harvest_dominance_margin(params, lam, eps)
    second = (-float(chi0(z, params)) * z ** (z / eps)
              / (4.0 * eps ** 2 * (lam - eps) ** ((lam - eps) / eps)))
    return AlphaBound(min(first, second) / params.rho, kappa * beta / (lam + beta))


def lower_tail_margin(params: ModelParams, lam: float, eps: float,
                       alpha: float, t0: float) -> float:
    """-chi0(lambda+eps) - rho alpha h(t*) e^{-r lambda}, the lower-solution margin on its far tail.

    h(t*) = (4 eps^2/(lambda+eps)^2) ((lambda-eps)/(lambda+eps))^{(lambda-eps)/eps} e^{lambda (t0+r)}
    """
    _check_eps(lam, eps)
    z = lam + eps
    h_star = (4.0 * eps ** 2 / z ** 2) * ((lam - eps) / z) ** ((lam - eps) / eps) \
        * math.exp(lam * (t0 + params.r))
    return -float(chi0(z, params)) - params.rho * alpha * h_star * math.exp(-params.r * lam)


def h_maximizer(params: ModelParams, lam: float, eps: float, t0: float) -> float:
    """t* = (1/eps) ln((lambda-eps)/(lambda+eps)) + t0 + r."""
    _check_eps(lam, eps)
    return math.log((lam - eps) / (lam + eps)) / eps + t0 + params.r
