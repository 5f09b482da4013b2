"""Run configuration and the check / bounds / iterate / verify commands.

Each cmd_* prints its report and returns a process exit code:
0 all gating checks pass, 1 a check failed, 2 unusable configuration or input.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import yaml

from nicholson import (
    RESULTS_DIR, CheckReport, ConfigError, GridError, InfeasibleError,
    MonotonicityBreach, ParameterError, load_config,
)
from nicholson.bounds import (
    check_compatibility, check_gamma_membership, lower_from, residual_on_grid,
    upper_from, verify_bound, weighted_gap,
)
from nicholson.iterate import DEFAULT_SAVE, fixed_point_residual, iterate
from nicholson.model import DerivedConstants, ModelParams, check_hypotheses, derive_constants
from nicholson.output import read_profile_csv, write_csv, write_metadata, write_profile_csv
from nicholson.profile import GridSpec
from nicholson.verify import (
    asymptotic_check, cross_check, cross_check_report, dde_residual, monotone_check,
)

logger = logging.getLogger("nicholson.cli")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
LIMIT_TOL = 1e-3        # times kappa, truncation adequacy of a converged profile


# ── Configuration ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Overrides:
    beta: float | None = None
    epsilon: float | None = None
    alpha: float | None = None
    t0: float | None = None
    lam: float | None = None


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    grid: GridSpec
    overrides: Overrides = field(default_factory=Overrides)
    tol: float = 1e-8
    max_iter: int = 500
    save_iterates: int = DEFAULT_SAVE
    exponential_checks: bool = False
    force: bool = False
    bound_tol: float = 1e-9
    residual_tol: float = 5e-3
    deviation_tol: float = 5e-3
    dt: float | None = None
    t_end: float = 10.0
    out_dir: Path = RESULTS_DIR

    def to_dict(self) -> dict:
        d = asdict(self)
        d["out_dir"] = str(self.out_dir)
        return d


def _coerce(raw, kind, where: str, optional: bool = False):
    if raw is None:
        if optional:
            return None
        raise ConfigError(f"missing value for {where}")
    if kind is bool:
        if isinstance(raw, bool):
            return raw
        raise ConfigError(f"{where} must be true or false, got {raw!r}")
    try:
        return kind(float(raw)) if kind is int else kind(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where} must be numeric, got {raw!r}") from e


def apply_sets(raw: dict, sets: Iterable[str]) -> dict:
    """Apply `section.key=value` overrides; values are parsed as YAML scalars."""
    for item in sets:
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot or not key:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        try:
            parsed = yaml.safe_load(value) if value.strip() else None
        except yaml.YAMLError as e:
            raise ConfigError(f"--set {item!r}: {e}") from e
        target = raw.setdefault(section, {})
        if not isinstance(target, dict):
            raise ConfigError(f"config section {section!r} is not a mapping")
        target[key] = parsed
    return raw


def _section(raw: dict, name: str, required: bool = True) -> dict:
    sec = raw.get(name)
    if sec is None and not required:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {name!r} missing or not a mapping")
    return sec


def build_run_config(path: Path | None = None, sets: Iterable[str] = (),
                     out: Path | None = None) -> RunConfig:
    """Load a YAML config, apply --set overrides, validate into a RunConfig."""
    raw = apply_sets(load_config(path), sets)

    model = _section(raw, "model")
    grid = _section(raw, "grid")
    ov = _section(raw, "overrides", required=False)
    it = _section(raw, "iteration", required=False)
    ver = _section(raw, "verify", required=False)
    outsec = _section(raw, "output", required=False)

    try:
        params = ModelParams(**{k: _coerce(model.get(k), float, f"model.{k}")
                                for k in ("delta", "harvest", "rho", "sigma", "r")})
        spec = GridSpec(*(_coerce(grid.get(k), float, f"grid.{k}") for k in ("t_min", "t_max", "h")))
        spec.require_aligned(params.sigma, params.r)
    except (ParameterError, GridError) as e:
        raise ConfigError(str(e)) from e

    overrides = Overrides(
        beta=_coerce(ov.get("beta"), float, "overrides.beta", optional=True),
        epsilon=_coerce(ov.get("epsilon"), float, "overrides.epsilon", optional=True),
        alpha=_coerce(ov.get("alpha"), float, "overrides.alpha", optional=True),
        t0=_coerce(ov.get("t0"), float, "overrides.t0", optional=True),
        lam=_coerce(ov.get("lambda"), float, "overrides.lambda", optional=True),
    )
    if overrides.t0 is not None and overrides.t0 >= 0:
        raise ConfigError(f"overrides.t0 must be negative, got {overrides.t0}")

    cfg = RunConfig(
        params=params, grid=spec, overrides=overrides,
        tol=_coerce(it.get("tol", 1e-8), float, "iteration.tol"),
        max_iter=_coerce(it.get("max_iter", 500), int, "iteration.max_iter"),
        save_iterates=_coerce(it.get("save_iterates", DEFAULT_SAVE), int, "iteration.save_iterates"),
        exponential_checks=_coerce(it.get("exponential_checks", False), bool,
                                   "iteration.exponential_checks"),
        force=_coerce(it.get("force", False), bool, "iteration.force"),
        bound_tol=_coerce(ver.get("bound_tol", 1e-9), float, "verify.bound_tol"),
        residual_tol=_coerce(ver.get("residual_tol", 5e-3), float, "verify.residual_tol"),
        deviation_tol=_coerce(ver.get("deviation_tol", 5e-3), float, "verify.deviation_tol"),
        dt=_coerce(ver.get("dt"), float, "verify.dt", optional=True),
        t_end=_coerce(ver.get("t_end", 10.0), float, "verify.t_end"),
        out_dir=Path(out or outsec.get("dir") or RESULTS_DIR),
    )
    if cfg.max_iter < 0 or cfg.save_iterates < 0:
        raise ConfigError("iteration.max_iter and iteration.save_iterates must be >= 0")
    return cfg


def constants_for(cfg: RunConfig) -> DerivedConstants:
    o = cfg.overrides
    return derive_constants(cfg.params, beta=o.beta, epsilon=o.epsilon, alpha=o.alpha,
                            t0=o.t0, lam=o.lam)


def _print_report(title: str, report: CheckReport) -> None:
    print(f"── {title} ──")
    for line in report.lines():
        print(line)


def _derive_or_report(cfg: RunConfig) -> DerivedConstants | None:
    try:
        return constants_for(cfg)
    except (InfeasibleError, ParameterError) as e:
        logger.error("%s", e)
        print(f"INFEASIBLE: {e}")
        return None


# ── Commands ────────────────────────────────────────────────────────────────

def cmd_check(cfg: RunConfig) -> int:
    consts = _derive_or_report(cfg)
    if consts is None:
        return EXIT_FAIL
    report = check_hypotheses(cfg.params, consts)
    _print_report("hypotheses", report)
    return EXIT_OK if report.all_passed else EXIT_FAIL


def cmd_bounds(cfg: RunConfig) -> int:
    consts = _derive_or_report(cfg)
    if consts is None:
        return EXIT_FAIL
    params, spec = cfg.params, cfg.grid
    u, l = upper_from(consts), lower_from(consts)
    nodes = spec.nodes
    out = cfg.out_dir

    write_csv(out / "upper.csv", {"t": nodes, "value": u(nodes)})
    write_csv(out / "lower.csv", {"t": nodes, "value": l(nodes)})
    t_u, phi = residual_on_grid(u, params, spec)
    t_l, psi = residual_on_grid(l, params, spec)
    write_csv(out / "residual_upper.csv", {"t": t_u, "value": phi})
    write_csv(out / "residual_lower.csv", {"t": t_l, "value": psi})
    write_csv(out / "compat.csv", {"t": nodes, "value": weighted_gap(u, l, consts.beta, nodes)})

    report = verify_bound(u, params, spec, cfg.bound_tol)
    report.extend(verify_bound(l, params, spec, cfg.bound_tol))
    report.extend(check_gamma_membership(u, consts.beta, consts.kappa, spec))
    report.extend(check_compatibility(u, l, consts.beta, consts.kappa, spec))
    _print_report("bounds", report)
    logger.info("bound curves written to %s", out)
    return EXIT_OK if report.all_passed else EXIT_FAIL


def cmd_iterate(cfg: RunConfig) -> int:
    consts = _derive_or_report(cfg)
    if consts is None:
        return EXIT_FAIL
    params, spec = cfg.params, cfg.grid
    hypotheses = check_hypotheses(params, consts)
    if not hypotheses.all_passed and not cfg.force:
        _print_report("hypotheses", hypotheses)
        print("refusing to iterate: hypotheses fail (set iteration.force=true to override)")
        return EXIT_FAIL

    try:
        result = iterate(params, consts, spec, tol=cfg.tol, max_iter=cfg.max_iter,
                         exponential_checks=cfg.exponential_checks, save=cfg.save_iterates)
    except MonotonicityBreach as e:
        print(f"MONOTONICITY BREACH: {e}")
        return EXIT_FAIL

    final = result.final
    out = cfg.out_dir
    write_csv(out / "iterates.csv",
              {"t": spec.nodes, **{f"x{i}": p.values for i, p in enumerate(result.saved)}})
    write_profile_csv(out / "final.csv", final)

    residual = dde_residual(final, params)
    limits = asymptotic_check(final, consts.kappa, LIMIT_TOL * consts.kappa,
                              LIMIT_TOL * consts.kappa)
    limits.extend(monotone_check(final, consts.kappa))
    write_metadata(out / "metadata.json", {
        "config": cfg.to_dict(),
        "constants": consts.to_dict(),
        "iteration": result.summary(),
        "fixed_point_residual": fixed_point_residual(final, params, consts.beta),
        "residual": residual.to_dict(),
        "limits": limits.to_dict(),
    })

    print(f"steps={result.steps} converged={result.converged} "
          f"last_gap={result.gaps[-1] if result.gaps else 0.0:.3e}")
    print(f"sup_residual={residual.sup_residual:.3e} at t={residual.argmax_t:.4f}")
    _print_report("limits", limits)
    # max_iter = 0 only exports the sampled upper solution
    settled = result.converged or cfg.max_iter == 0
    return EXIT_OK if settled and limits.all_passed else EXIT_FAIL


def cmd_verify(cfg: RunConfig) -> int:
    path = cfg.out_dir / "final.csv"
    if not path.exists():
        print(f"no final profile at {path}; run `iterate` first")
        return EXIT_CONFIG
    consts = _derive_or_report(cfg)
    if consts is None:
        return EXIT_FAIL
    try:
        final = read_profile_csv(path, left_rate=consts.lam, right_limit=consts.kappa)
    except ConfigError as e:
        print(f"unusable final profile: {e}")
        return EXIT_CONFIG

    params = cfg.params
    residual = dde_residual(final, params)
    cross = cross_check(final, params, t_start=0.0, t_end=cfg.t_end, dt=cfg.dt)

    report = CheckReport()
    report.add("dde-residual", cfg.residual_tol - residual.sup_residual,
               f"sup |-x' + f(x_t)| <= {cfg.residual_tol:g}",
               detail=f"t={residual.argmax_t:.6g}")
    report.extend(cross_check_report(cross, cfg.deviation_tol))
    tol = LIMIT_TOL * consts.kappa
    report.extend(asymptotic_check(final, consts.kappa, tol, tol))
    report.extend(monotone_check(final, consts.kappa))

    print(f"sup_residual={residual.sup_residual:.6e} argmax_t={residual.argmax_t:.6g}")
    print(f"endpoint_errors=({residual.endpoint_errors[0]:.3e}, {residual.endpoint_errors[1]:.3e})")
    print(f"cross_check_deviation={cross.max_deviation:.6e} growth={cross.growth:.3g}")
    _print_report("verify", report)
    return EXIT_OK if report.all_passed else EXIT_FAIL


COMMANDS = {
    "check": cmd_check,
    "bounds": cmd_bounds,
    "iterate": cmd_iterate,
    "verify": cmd_verify,
}
