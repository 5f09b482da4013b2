"""Model constants, equilibria, feasibility of the decay rate, and the hypothesis report."""

import logging
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import bisect

from nicholson import CheckReport, InfeasibleError, ParameterError
from nicholson.charroots import (
    alpha_bound, chi0, epsilon_window, find_lambda, harvest_dominance_margin,
    h_maximizer, lower_tail_margin,
)

logger = logging.getLogger("nicholson.model")

SIGMA0_TOL = 1e-12
BETA_TOL = 1e-10
H1_TOL = 1e-12          # relative to rho
LAMBDA_PIN_TOL = 5e-4
DEFAULT_T0 = -1.0
ALPHA_SAFETY = 0.9


@dataclass(frozen=True)
class ModelParams:
    """x'(t) = -delta x(t) - H x(t - sigma) + rho x(t - r) e^{-x(t - r)}."""
    delta: float
    harvest: float
    rho: float
    sigma: float
    r: float

    def __post_init__(self):
        for name in ("delta", "harvest", "rho", "sigma", "r"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be a finite positive number, got {value!r}")

    @property
    def ratio(self) -> float:
        return self.rho / (self.delta + self.harvest)

    @property
    def mu0(self) -> float:
        """1/sigma + delta, the distinguished feasible decay rate."""
        return 1.0 / self.sigma + self.delta

    def require_admissible(self) -> None:
        """Raise InfeasibleError unless (A1) and (A2) hold."""
        if not 1.0 < self.ratio <= math.e:
            raise InfeasibleError(f"(A1) violated: rho/(delta+H) = {self.ratio:.6g} not in (1, e]")
        if not self.sigma < self.r:
            raise InfeasibleError(f"(A2) violated: sigma = {self.sigma} >= r = {self.r}")

    def to_dict(self) -> dict:
        return asdict(self)


def delay_rhs(params: ModelParams, x, x_sigma, x_r):
    """Right-hand side of the model given current and delayed states (arrays allowed)."""
    return -params.delta * x - params.harvest * x_sigma + params.rho * x_r * np.exp(-x_r)


def positive_equilibrium(params: ModelParams) -> float:
    """kappa = ln(rho/(delta+H)); certifies that the constant kappa zeroes the right side."""
    if params.ratio <= 1.0:
        raise InfeasibleError(
            f"(A1) violated: rho/(delta+H) = {params.ratio:.6g} <= 1, no positive equilibrium"
        )
    kappa = math.log(params.ratio)
    residual = float(delay_rhs(params, kappa, kappa, kappa))
    logger.debug("kappa = %.12f, |f(kappa)| = %.2e", kappa, abs(residual))
    return kappa


def solve_sigma0(delta: float, harvest: float) -> float:
    """Unique sigma0 > 0 with sigma0 H e^{1 + sigma0 delta} = 1."""
    if not (delta > 0 and harvest > 0):
        raise ParameterError(f"solve_sigma0 needs delta > 0 and H > 0 (got {delta}, {harvest})")

    def g(s):
        return s * harvest * math.exp(1.0 + s * delta) - 1.0

    hi = 1.0 / (harvest * math.e)
    while g(hi) <= 0:
        hi *= 2.0
    return float(bisect(g, 0.0, hi, xtol=SIGMA0_TOL))


def h2_margin(params: ModelParams, beta: float) -> float:
    """beta - delta - H e^{sigma beta}; nonnegative exactly on the feasible interval."""
    return beta - params.delta - params.harvest * math.exp(params.sigma * beta)


def feasible_beta_interval(params: ModelParams) -> tuple[float, float]:
    """Endpoints of {beta : beta - delta - H e^{sigma beta} >= 0}.

    The margin is concave in beta and positive at mu0 whenever sigma <= sigma0,
    so the set is an interval around mu0.
    """
    mu0 = params.mu0
    if h2_margin(params, mu0) < 0:
        raise InfeasibleError(
            f"cond-2 violated: sigma = {params.sigma} > sigma0 = "
            f"{solve_sigma0(params.delta, params.harvest):.6g}, feasible beta interval is empty"
        )

    def margin(b):
        return h2_margin(params, b)

    # margin(delta) = -H e^{sigma delta} < 0
    lo = bisect(margin, params.delta, mu0, xtol=BETA_TOL)
    far = mu0 + 1.0 / params.sigma
    while margin(far) >= 0:
        far *= 2.0
    hi = bisect(margin, mu0, far, xtol=BETA_TOL)

    if lo <= params.delta + params.harvest:
        raise InfeasibleError(f"feasible beta {lo:.6g} does not exceed delta + H")
    logger.debug("feasible beta interval [%.10f, %.10f], mu0 = %.6f", lo, hi, mu0)
    return float(lo), float(hi)


# ── Derived constants ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class DerivedConstants:
    kappa: float
    lam: float
    beta: float
    epsilon: float
    alpha: float
    t0: float
    sigma0: float
    beta_lo: float
    beta_hi: float
    lambda_pin: float | None = None
    lambda_roots: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


def derive_constants(params: ModelParams, beta: float | None = None,
                     epsilon: float | None = None, alpha: float | None = None,
                     t0: float | None = None, lam: float | None = None) -> DerivedConstants:
    """Compute every constant the constructions need, honouring explicit overrides.

    An infeasible beta interval is recorded as NaN endpoints so that
    check_hypotheses can report cond-2 instead of aborting.
    """
    kappa = positive_equilibrium(params)
    root = find_lambda(params)
    if lam is not None and abs(lam - root.root) > LAMBDA_PIN_TOL:
        logger.warning("pinned lambda %.6f disagrees with computed root %.6f; using the computed one",
                       lam, root.root)

    sigma0 = solve_sigma0(params.delta, params.harvest)
    try:
        beta_lo, beta_hi = feasible_beta_interval(params)
    except InfeasibleError as e:
        logger.warning("%s", e)
        beta_lo = beta_hi = math.nan
    beta = params.mu0 if beta is None else float(beta)

    if epsilon is None:
        window = epsilon_window(params, root.root)
        epsilon = root.root / 2.0 if window.empty else window.midpoint
    t0 = DEFAULT_T0 if t0 is None else float(t0)
    if alpha is None:
        if 0 < epsilon < root.root:
            alpha = ALPHA_SAFETY * alpha_bound(params, root.root, epsilon, kappa, beta).limit
        else:
            alpha = math.nan

    consts = DerivedConstants(kappa=kappa, lam=root.root, beta=beta, epsilon=float(epsilon),
                              alpha=float(alpha), t0=t0, sigma0=sigma0,
                              beta_lo=beta_lo, beta_hi=beta_hi, lambda_pin=lam,
                              lambda_roots=root.sign_changes)
    logger.info("kappa=%.4f lambda=%.4f beta=%.4f eps=%.4f alpha=%.4f t0=%.2f sigma0=%.4f",
                kappa, consts.lam, beta, consts.epsilon, consts.alpha, t0, sigma0)
    return consts


def check_hypotheses(params: ModelParams, consts: DerivedConstants) -> CheckReport:
    """Margins for (A1), (A2), the three existence conditions, (H1), (H2) and the alpha bounds."""
    report = CheckReport()
    delta, H, rho, sigma, r = params.delta, params.harvest, params.rho, params.sigma, params.r
    lam, beta, eps, alpha, kappa = consts.lam, consts.beta, consts.epsilon, consts.alpha, consts.kappa

    report.add("A1-lower", params.ratio - 1.0, "rho/(delta+H) > 1", strict=True)
    report.add("A1-upper", math.e - params.ratio, "rho/(delta+H) <= e")
    report.add("A2", r - sigma, "sigma < r (cond-1)", strict=True)
    report.add("cond-2", consts.sigma0 - sigma, "sigma <= sigma0",
               detail=f"sigma0={consts.sigma0:.6g}")
    report.add("mu0", h2_margin(params, params.mu0), "mu0 - delta - H e^{sigma mu0} >= 0",
               detail=f"mu0={params.mu0:.6g}")
    report.add("cond-3", harvest_dominance_margin(params, lam, eps),
               "H e^{-(lambda+eps) sigma} - rho e^{-(lambda+eps) r} >= 0")
    report.add("H2", h2_margin(params, beta), "beta - delta - H e^{beta sigma} >= 0",
               detail=f"beta={beta:.6g}")
    report.add("beta-floor", beta - delta - H, "beta > delta + H", strict=True)

    k = lam + beta
    g_sigma = -(kappa * lam / k) * math.exp(-beta * sigma) * h2_margin(params, beta)
    report.add("upper-delay-branch", -g_sigma,
               "g(sigma) <= 0 on the upper solution's (0, sigma] branch")

    report.add("lambda-root", 1e-10 - abs(float(chi0(lam, params))), "|chi0(lambda)| <= 1e-10",
               detail=f"lambda={lam:.10g}")
    report.add("lambda-unique", 1 - consts.lambda_roots,
               "one sign change of chi0 on (0, rho]", gating=False,
               detail=f"sign changes={consts.lambda_roots}")
    if consts.lambda_pin is not None:
        report.add("lambda-pin", LAMBDA_PIN_TOL - abs(consts.lambda_pin - lam),
                   "|lambda_pinned - lambda| <= 5e-4", gating=False,
                   detail=f"pinned={consts.lambda_pin:.6g}")

    report.add("eps-window", min(eps, lam - eps), "0 < eps < lambda", strict=True,
               detail=f"eps={eps:.6g}")
    report.add("alpha-pos", alpha, "alpha > 0", strict=True)
    if 0 < eps < lam:
        bounds = alpha_bound(params, lam, eps, kappa, beta)
        report.add("alpha-bound", bounds.amplitude - alpha, "alpha < amplitude bound", strict=True,
                   gating=False, detail=f"bound={bounds.amplitude:.6g}")
        report.add("alpha-cap", bounds.cap - alpha, "alpha <= kappa mu/(lambda+mu)",
                   detail=f"cap={bounds.cap:.6g}")
        report.add("lower-tail", lower_tail_margin(params, lam, eps, alpha, consts.t0),
                   "-chi0(lambda+eps) - rho alpha h(t*) e^{-r lambda} >= 0", gating=False,
                   detail=f"t*={h_maximizer(params, lam, eps, consts.t0):.6g}")

    scale = H1_TOL * rho
    report.add("H1-zero", scale - abs(float(delay_rhs(params, 0.0, 0.0, 0.0))), "|f(0)| <= 1e-12 rho")
    report.add("H1-kappa", scale - abs(float(delay_rhs(params, kappa, kappa, kappa))),
               "|f(kappa)| <= 1e-12 rho")

    for item in report.failures():
        log = logger.warning if item.gating else logger.info
        log("%s %s: margin %.4e (%s)", item.name, item.status, item.margin, item.formula)
    return report
