"""Tests for run configuration and the check / bounds / iterate / verify commands."""

import json
from pathlib import Path

import numpy as np
import pytest

import run_heteroclinic
from nicholson import ROOT_DIR, ConfigError
from nicholson.cli import (
    build_run_config, cmd_bounds, cmd_check, cmd_iterate, cmd_verify,
)
from nicholson.output import read_csv

FIXTURES_DIR = Path(__file__).parent / "fixtures"
REFERENCE_CONFIG = ROOT_DIR / "config" / "reference.yaml"
COARSE_CONFIG = FIXTURES_DIR / "coarse.yaml"


@pytest.fixture
def coarse(tmp_path):
    return build_run_config(COARSE_CONFIG, out=tmp_path)


@pytest.fixture(scope="module")
def coarse_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("coarse_run")
    cfg = build_run_config(COARSE_CONFIG, out=out)
    code = cmd_iterate(cfg)
    return cfg, code, out


class TestBuildRunConfig:
    def test_default_config(self):
        cfg = build_run_config()
        assert cfg.params.rho == 6.0
        assert cfg.grid.h == 0.01
        assert cfg.overrides.beta is None
        assert cfg.tol == 1e-8 and cfg.max_iter == 500

    def test_reference_preset(self):
        cfg = build_run_config(REFERENCE_CONFIG)
        assert cfg.overrides.beta == 6.7093
        assert cfg.overrides.lam == 0.3420
        assert cfg.overrides.alpha == 0.5

    def test_set_overrides(self, tmp_path):
        cfg = build_run_config(sets=["iteration.tol=1e-6", "model.sigma=0.1",
                                     "overrides.alpha=0.2"], out=tmp_path)
        assert cfg.tol == 1e-6
        assert cfg.params.sigma == 0.1
        assert cfg.overrides.alpha == 0.2
        assert cfg.out_dir == tmp_path

    @pytest.mark.parametrize("item", ["tol=1", "iteration.tol", "=3"])
    def test_bad_set_syntax(self, item):
        with pytest.raises(ConfigError):
            build_run_config(sets=[item])

    @pytest.mark.parametrize("item", [
        "grid.h=0", "grid.t_min=5", "grid.h=0.04", "model.harvest=0", "model.rho=abc",
        "overrides.t0=1", "iteration.max_iter=-1",
    ])
    def test_invalid_values(self, item):
        with pytest.raises(ConfigError):
            build_run_config(sets=[item])

    def test_malformed_file(self):
        with pytest.raises(ConfigError):
            build_run_config(FIXTURES_DIR / "malformed.yaml")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            build_run_config(tmp_path / "absent.yaml")


class TestCmdCheck:
    def test_reference_config_passes(self, capsys):
        assert cmd_check(build_run_config(REFERENCE_CONFIG)) == 0
        out = capsys.readouterr().out
        assert "alpha-bound" in out and "WARN" in out

    def test_sigma_above_threshold_flags_cond2(self, capsys):
        cfg = build_run_config(sets=["model.sigma=0.2"])
        assert cmd_check(cfg) == 1
        line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("cond-2"))
        assert "FAIL" in line

    def test_no_equilibrium_is_infeasible(self, capsys):
        assert cmd_check(build_run_config(sets=["model.rho=2"])) == 1
        assert "INFEASIBLE" in capsys.readouterr().out


class TestCmdBounds:
    def test_certified_defaults(self, coarse, capsys):
        assert cmd_bounds(coarse) == 0
        for name in ("upper", "lower", "residual_upper", "residual_lower", "compat"):
            cols = read_csv(coarse.out_dir / f"{name}.csv")
            assert list(cols) == ["t", "value"]
        psi = read_csv(coarse.out_dir / "residual_lower.csv")["value"]
        assert psi.min() >= -1e-9

    def test_failure_still_writes_files(self, tmp_path):
        cfg = build_run_config(COARSE_CONFIG, sets=["overrides.alpha=50"], out=tmp_path)
        assert cmd_bounds(cfg) == 1
        assert (tmp_path / "compat.csv").exists()


class TestCmdIterate:
    def test_saved_iterates_ordered(self, coarse_run):
        cfg, code, out = coarse_run
        assert code == 0
        cols = read_csv(out / "iterates.csv")
        assert list(cols) == ["t", "x0", "x1", "x2", "x3"]
        for a, b in (("x0", "x1"), ("x1", "x2"), ("x2", "x3")):
            assert np.all(cols[b] <= cols[a] + 1e-10)

    def test_metadata(self, coarse_run):
        _, _, out = coarse_run
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["iteration"]["converged"] is True
        assert meta["iteration"]["steps"] == len(meta["iteration"]["gaps"])
        assert meta["constants"]["lambda_roots"] == 1
        assert "sup_residual" in meta["residual"]

    def test_deterministic(self, tmp_path):
        cfg = build_run_config(COARSE_CONFIG, sets=["iteration.max_iter=20"], out=tmp_path)
        cmd_iterate(cfg)
        first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        cmd_iterate(cfg)
        second = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        assert first == second

    def test_unconverged_run_exits_nonzero(self, tmp_path):
        cfg = build_run_config(COARSE_CONFIG, sets=["iteration.max_iter=3"], out=tmp_path)
        assert cmd_iterate(cfg) == 1
        meta = json.loads((tmp_path / "metadata.json").read_text())
        assert meta["iteration"]["converged"] is False
        assert (tmp_path / "final.csv").exists()

    def test_zero_steps_keeps_upper_solution(self, tmp_path):
        cfg = build_run_config(COARSE_CONFIG, sets=["iteration.max_iter=0"], out=tmp_path)
        assert cmd_iterate(cfg) == 0
        final = read_csv(tmp_path / "final.csv")["value"]
        upper = read_csv(tmp_path / "iterates.csv")["x0"]
        assert np.array_equal(final, upper)

    def test_refuses_when_hypotheses_fail(self, tmp_path):
        cfg = build_run_config(COARSE_CONFIG, sets=["model.sigma=0.2"], out=tmp_path)
        assert cmd_iterate(cfg) == 1
        assert not (tmp_path / "final.csv").exists()


class TestCmdVerify:
    def test_after_iterate(self, coarse_run, capsys):
        cfg, _, _ = coarse_run
        assert cmd_verify(cfg) == 0
        assert "sup_residual=" in capsys.readouterr().out

    def test_missing_final(self, coarse):
        assert cmd_verify(coarse) == 2

    def test_corrupted_final(self, coarse):
        (coarse.out_dir / "final.csv").write_text("t,value\n-1,0\n0,oops\n1,2\n")
        assert cmd_verify(coarse) == 2


class TestMain:
    def test_config_error_exit_code(self, capsys):
        code = run_heteroclinic.main(["check", "--config", str(FIXTURES_DIR / "malformed.yaml")])
        assert code == 2
        assert "CONFIG ERROR" in capsys.readouterr().out

    def test_empty_grid_exit_code(self, tmp_path):
        code = run_heteroclinic.main(["bounds", "--set", "grid.h=0", "--out", str(tmp_path)])
        assert code == 2

    def test_check_reference(self):
        assert run_heteroclinic.main(["check", "--config", str(REFERENCE_CONFIG)]) == 0
