import json
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from mvhawkes import ValidationError, default_config
from mvhawkes.cli import main
from mvhawkes.config import (apply_overrides, config_from_dict, dump_config,
                             load_config)

TINY = {
    "hawkes": {"lambda0": 0.48, "lambda_inf": 0.48, "alpha": 5.0, "beta": 0.1},
    "market": {"r": 0.02, "mu": 0.09, "sigma": 0.2, "J": 1.0,
               "jump_mean": -0.02, "jump_second": 0.06},
    "solver": {"horizon": 2.0, "dt": 0.1, "dlam": 0.1, "lam_lo": 0.1,
               "lam_hi": 2.0, "n_paths": 100, "seed": 7},
    "frontier": {"x0": 1.0, "xi_count": 5, "wealth_paths": 2000,
                 "wealth_dt": 0.01},
}


@pytest.fixture()
def tiny_config(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path


def run(tiny_config, out, *argv):
    return main(["--config", str(tiny_config), "--out", str(out), *argv])


class TestConfig:
    def test_default_matches_headline_parameters(self):
        cfg = default_config()
        assert cfg.market.r == 0.02
        assert cfg.market.mu[0] == 0.09
        assert cfg.market.sigma[0, 0] == 0.20
        assert cfg.market.jump_mean[0] == -0.02
        assert cfg.market.jump_second[0] == 0.06
        assert cfg.hawkes.alpha[0] == 5.0
        assert cfg.hawkes.beta[0, 0] == 0.1
        assert cfg.hawkes.lambda_inf[0] == 0.48
        assert cfg.solver.horizon == 2.0
        assert cfg.solver.dt == 0.02
        assert cfg.solver.dlam == 0.01
        assert (cfg.solver.lam_lo, cfg.solver.lam_hi) == (0.1, 2.0)
        assert cfg.solver.n_paths == 5000
        assert cfg.frontier.x0 == 1.0

    def test_roundtrip_identity(self, tmp_path):
        cfg = config_from_dict(TINY)
        path = tmp_path / "cfg.yaml"
        dump_config(cfg, path)
        again = load_config(path)
        assert again.to_dict() == cfg.to_dict()
        dump_config(again, tmp_path / "cfg2.yaml")
        assert (tmp_path / "cfg.yaml").read_bytes() == \
            (tmp_path / "cfg2.yaml").read_bytes()

    def test_overrides_typing(self):
        data = {"solver": {"n_paths": 100}}
        apply_overrides(data, ["solver.n_paths=250", "solver.crn=false",
                               "hawkes.beta=[[0.3]]"])
        assert data["solver"]["n_paths"] == 250
        assert data["solver"]["crn"] is False
        assert data["hawkes"]["beta"] == [[0.3]]

    def test_error_names_key_path(self):
        bad = dict(TINY, hawkes={**TINY["hawkes"], "alpha": -1})
        with pytest.raises(ValidationError) as err:
            config_from_dict(bad)
        assert "hawkes.alpha" in str(err.value)

    def test_unknown_block_rejected(self):
        with pytest.raises(ValidationError):
            config_from_dict(dict(TINY, exotic={}))

    def test_default_sweep_levels(self):
        cfg = default_config()
        by_name = {s.param: s for s in cfg.sweeps}
        assert by_name["lambda0"].levels == (0.1, 0.48, 1.9)
        assert by_name["lambda_inf"].levels == (0.3, 0.48, 0.8)
        assert by_name["alpha"].levels == (1.0, 2.0, 5.0)
        assert by_name["beta"].levels == (0.1, 0.5, 2.0)
        assert by_name["alpha"].lam0 == 1.0
        assert by_name["beta"].lam0 == 1.0
        assert by_name["lambda_inf"].tie_lam0


class TestSimulateHawkes:
    def test_paths_and_summary(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run(tiny_config, out, "simulate-hawkes", "--paths", "3") == 0
        for i in range(3):
            lines = (out / f"path_{i:04d}.csv").read_text().splitlines()
            assert lines[0] == "t,lambda_1,N_1"
            assert len(lines) == 1 + 21  # horizon 2, dt 0.1
        assert (out / "summary.csv").exists()
        assert (out / "config.yaml").exists()

    def test_no_excitation_summary_matches_decay(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        code = main(["--config", str(tiny_config), "--out", str(out),
                     "--set", "hawkes.beta=0.0",
                     "--set", "hawkes.lambda0=0.1",
                     "simulate-hawkes", "--paths", "400",
                     "--scheme", "exact"])
        assert code == 0
        rows = np.genfromtxt(out / "summary.csv", delimiter=",", names=True)
        assert np.all(np.abs(rows["z_1"]) <= 3.0)
        # expectation column is the relaxation curve towards 0.48
        t = rows["t"]
        expected = np.exp(-5 * t) * 0.1 + (1 - np.exp(-5 * t)) * 0.48
        assert np.allclose(rows["expected_lambda_1"], expected, rtol=1e-12)

    def test_invalid_alpha_exit_code(self, tiny_config, tmp_path, capsys):
        code = main(["--config", str(tiny_config), "--out",
                     str(tmp_path / "o"), "--set", "hawkes.alpha=-1",
                     "simulate-hawkes"])
        assert code == 2
        assert "hawkes.alpha" in capsys.readouterr().err

    def test_output_root_env_var(self, tiny_config, tmp_path, monkeypatch):
        root = tmp_path / "from_env"
        monkeypatch.setenv("MVHAWKES_OUT", str(root))
        code = main(["--config", str(tiny_config), "simulate-hawkes",
                     "--paths", "1"])
        assert code == 0
        assert (root / "path_0000.csv").exists()


class TestSolveG:
    def test_solve_and_cache(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run(tiny_config, out, "solve-g") == 0
        report1 = json.loads((out / "solve_report.json").read_text())
        assert report1["cache_hit"] is False
        first = (out / "gtable.npz").read_bytes()
        surface1 = (out / "surface.csv").read_bytes()

        assert run(tiny_config, out, "solve-g") == 0
        report2 = json.loads((out / "solve_report.json").read_text())
        assert report2["cache_hit"] is True
        assert (out / "gtable.npz").read_bytes() == first
        assert (out / "surface.csv").read_bytes() == surface1

        assert main(["--config", str(tiny_config), "--out", str(out),
                     "--force", "solve-g"]) == 0
        report3 = json.loads((out / "solve_report.json").read_text())
        assert report3["cache_hit"] is False
        assert (out / "surface.csv").read_bytes() == surface1

    def test_surface_terminal_row(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        run(tiny_config, out, "solve-g")
        rows = np.genfromtxt(out / "surface.csv", delimiter=",", names=True)
        terminal = rows["gtilde"][rows["t"] == 2.0]
        assert terminal.size > 0 and np.all(terminal == 1.0)

    def test_no_excitation_oracle_comparison(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        code = main(["--config", str(tiny_config), "--out", str(out),
                     "--set", "hawkes.beta=0.0", "solve-g"])
        assert code == 0
        report = json.loads((out / "solve_report.json").read_text())
        assert report["poisson_check"]["max_rel_error"] <= 0.01
        assert (out / "poisson_check.csv").exists()

    def test_report_diagnostics(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        run(tiny_config, out, "solve-g")
        report = json.loads((out / "solve_report.json").read_text())
        assert report["bounds"]["positive"] and report["bounds"]["at_most_one"]
        assert report["monotone"]["monotone"]
        assert np.isfinite(report["pde_residual"]["rms"])
        assert report["g0"]["value"] < 1.0


class TestFrontierCmd:
    def test_first_row_zero_variance(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run(tiny_config, out, "frontier") == 0
        rows = np.genfromtxt(out / "frontier.csv", delimiter=",", names=True)
        assert rows["xi"][0] == pytest.approx(math.exp(0.04))
        assert rows["variance"][0] == 0.0
        assert np.all(np.diff(rows["variance"]) > 0)

    def test_poisson_closed_form(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run(tiny_config, out, "--set", "frontier.xi_count=2",
                   "--set", "frontier.xi_start=1.2",
                   "frontier", "--poisson", "lambda=0.48") == 0
        rows = np.genfromtxt(out / "frontier.csv", delimiter=",", names=True)
        assert rows["variance"][0] == pytest.approx(0.16554, abs=1e-5)

    def test_validate_exit_zero(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        code = run(tiny_config, out, "frontier", "--poisson", "0.48",
                   "--validate")
        assert code == 0
        rows = np.genfromtxt(out / "wealth_validation.csv", delimiter=",",
                             names=True)
        assert rows["ok_mean"] == 1 and rows["ok_var"] == 1

    def test_zero_premium_is_numerical_failure(self, tiny_config, tmp_path,
                                               capsys):
        code = main(["--config", str(tiny_config), "--out",
                     str(tmp_path / "o"), "--set", "market.mu=0.02",
                     "frontier", "--poisson", "0.48"])
        assert code == 3

    def test_io_failure_exit_code(self, tiny_config, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        code = main(["--config", str(tiny_config), "--out",
                     str(blocker / "sub"), "frontier", "--poisson", "0.48"])
        assert code == 4


class TestSweepsAndComparison:
    def test_sensitivity_orderings(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run(tiny_config, out, "sensitivity") == 0
        rep = np.genfromtxt(out / "ordering_report.csv", delimiter=",",
                            names=True, dtype=None, encoding="utf-8")
        assert np.all(rep["ordered"] == 1)
        for sweep in ("lambda0", "lambda_inf", "alpha", "beta"):
            assert (out / f"sweep_{sweep}.csv").exists()

    def test_compare_poisson(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert run(tiny_config, out, "compare-poisson") == 0
        rep = np.genfromtxt(out / "compare_verdicts.csv", delimiter=",",
                            names=True, dtype=None, encoding="utf-8")
        assert np.all(rep["ok"] == 1)


class TestDeterminism:
    def test_byte_identical_outputs(self, tiny_config, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run(tiny_config, out, "simulate-hawkes", "--paths", "2") == 0
            assert run(tiny_config, out, "solve-g") == 0
            assert run(tiny_config, out, "frontier") == 0
            outs.append(out)
        for rel in ("path_0000.csv", "path_0001.csv", "summary.csv",
                    "surface.csv", "frontier.csv", "config.yaml"):
            assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes(), rel
