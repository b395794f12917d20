import json
import math

import numpy as np
import pytest

from decolab import estimate
from decolab.cli import RunConfig, main


def write_config(tmp_path, name="run.cfg", **kv):
    lines = [f"{k} = {v}" for k, v in kv.items()]
    path = tmp_path / name
    path.write_text("# generated by the test suite\n" + "\n".join(lines) + "\n")
    return str(path)


class TestConfigFile:
    def test_unknown_key_is_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, model="gup-markov", banana="1")
        assert main(["simulate", "--config", cfg]) == 2
        assert "banana" in capsys.readouterr().err

    def test_missing_file_is_exit_2(self, capsys):
        assert main(["simulate", "--config", "/nonexistent/run.cfg"]) == 2

    def test_bad_value_is_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dim="three")
        assert main(["simulate", "--config", cfg]) == 2

    def test_unknown_model_is_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, model="lindblad")
        assert main(["simulate", "--config", cfg]) == 2

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("\n# full line comment\nmodel = damping-only  # trailing\n\n")
        cfg = RunConfig.from_file(path)
        assert cfg.model == "damping-only"

    def test_profile_fills_device_scales(self, tmp_path):
        cfg = RunConfig.from_file(write_config(tmp_path, profile="hbar-16ug"))
        assert cfg.f_hz == pytest.approx(5.96e9)
        assert cfg.ap_hw == pytest.approx(1.5e-33)


class TestSimulate:
    def test_damping_only_matches_closed_form(self, tmp_path):
        out = tmp_path / "sim.json"
        csv = tmp_path / "sim.csv"
        cfg = write_config(
            tmp_path, model="damping-only", initial_state="fock(1)", dim=8,
            t_end=20.0, dt=0.01, sample_every=200, gamma_dimless=0.05,
            json_out=str(out), csv_out=str(csv))
        assert main(["simulate", "--config", cfg]) == 0
        data = json.loads(out.read_text())
        assert data["max_abs_deviation_from_analytic"]["rho_11"] < 1e-10
        rows = csv.read_text().strip().splitlines()
        assert rows[0] == "t_omega,t_seconds,rho_00,abs_rho_01,rho_11"
        t, _, _, _, p11 = map(float, rows[-1].split(","))
        assert p11 == pytest.approx(math.exp(-0.05 * t), abs=1e-10)

    def test_json_embeds_resolved_config(self, tmp_path):
        out = tmp_path / "sim.json"
        cfg = write_config(tmp_path, model="gup-markov", omega_tau_g=1e4,
                           t_end=1.0, json_out=str(out))
        assert main(["simulate", "--config", cfg]) == 0
        data = json.loads(out.read_text())
        assert data["config"]["omega_tau_g"] == pytest.approx(1e4)
        assert data["config"]["dim"] == 20  # default materialized
        assert data["config"]["omega_tau_d"] is None  # inf -> null

    def test_reproducible_bytes(self, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            csv = tmp_path / name
            cfg = write_config(
                tmp_path, name=name + ".cfg", model="gup-markov",
                omega_tau_g=500.0, initial_state="superposition01", dim=10,
                t_end=5.0, dt=0.05, sample_every=20, csv_out=str(csv),
                json_out=str(tmp_path / (name + ".json")))
            assert main(["simulate", "--config", cfg]) == 0
            outs.append(csv.read_bytes())
        assert outs[0] == outs[1]


class TestEnsemble:
    def test_zero_noise_matches_simulate(self, tmp_path):
        sim_csv = tmp_path / "sim.csv"
        ens_csv = tmp_path / "ens.csv"
        common = dict(initial_state="superposition01", dim=8, t_end=5.0,
                      dt=0.05, sample_every=25, beta_bar=1.0)
        cfg_sim = write_config(tmp_path, name="sim.cfg", model="damping-only",
                               csv_out=str(sim_csv),
                               json_out=str(tmp_path / "s.json"), **common)
        cfg_ens = write_config(tmp_path, name="ens.cfg", model="gup-markov",
                               n_traj=100, csv_out=str(ens_csv),
                               json_out=str(tmp_path / "e.json"), **common)
        assert main(["simulate", "--config", cfg_sim]) == 0
        assert main(["ensemble", "--config", cfg_ens]) == 0
        sim = np.loadtxt(sim_csv, delimiter=",", skiprows=1)
        ens = np.loadtxt(ens_csv, delimiter=",", skiprows=1)
        # ensemble columns interleave stderr; compare abs_rho_01
        assert np.allclose(sim[:, 3], ens[:, 4], atol=1e-6)
        stderr = json.loads((tmp_path / "e.json").read_text())["max_stderr"]
        # no noise: identical trajectories up to the cancellation error of the
        # running-variance accumulator
        assert stderr < 1e-6


class TestFitAndBounds:
    def test_fit_round_trip(self, tmp_path):
        truth = {"A": 0.9, "T1": 85.8e-6, "C": 0.05}
        ds = estimate.synthesize_dataset("exp", truth, 80, 0.01, 3, 400e-6)
        data = tmp_path / "t1.csv"
        ds.to_csv(data)
        out = tmp_path / "fit.json"
        assert main(["fit", "--data", str(data), "--fit-model", "exp",
                     "--json-out", str(out)]) == 0
        fit = json.loads(out.read_text())
        assert fit["converged"]
        assert fit["params"]["T1"] == pytest.approx(
            truth["T1"], abs=3 * fit["sigmas"]["T1"])

    def test_fit_flat_data_is_exit_3(self, tmp_path, capsys):
        data = tmp_path / "flat.csv"
        rows = ["t_us,y"] + [f"{i + 1},{1.0 if i == 0 else 0.0}" for i in range(16)]
        data.write_text("\n".join(rows) + "\n")
        assert main(["fit", "--data", str(data), "--fit-model", "ramsey"]) == 3

    def test_bounds_anchor_values(self, tmp_path):
        out = tmp_path / "bounds.json"
        assert main(["bounds", "--t1-us", "85.8", "--st1-us", "1.5",
                     "--t2-us", "147.3", "--st2-us", "2.6",
                     "--epsilon", "0.020", "--sigma-epsilon", "0.005",
                     "--profile", "hbar-16ug", "--json-out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["gup"]["tau_g"]["value"] == pytest.approx(975.18e-6, rel=1e-3)
        assert data["breuer"]["tau_c"]["value"] == pytest.approx(3.656e-18, rel=1e-2)
        assert data["gup"]["kappa"]["value"] == pytest.approx(4.06e46, rel=1e-2)
        assert data["deformation"]["beta_bar"]["value"] == pytest.approx(
            2.22e30, rel=1e-2)

    def test_inconsistent_times_exit_4(self, capsys):
        assert main(["bounds", "--t1-us", "100", "--t2-us", "250"]) == 4

    def test_bounds_prints_json_without_outfile(self, capsys):
        assert main(["bounds", "--t1-us", "85.8", "--t2-us", "147.3"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert "gup" in data and "breuer" in data


class TestWigner:
    def test_vacuum_grid_and_ellipticity(self, tmp_path):
        out = tmp_path / "w.json"
        csv = tmp_path / "w.csv"
        cfg = write_config(tmp_path, model="damping-only", t_end=0.0, dim=12,
                           json_out=str(out), csv_out=str(csv))
        assert main(["wigner", "--config", cfg]) == 0
        data = json.loads(out.read_text())
        assert data["captured_mass"] == pytest.approx(1.0, abs=1e-6)
        assert abs(data["ellipticity"]["value"]) < 1e-6
        assert csv.read_text().splitlines()[0] == "x,p,w"


class TestAnalyticCommand:
    def test_curve_csv(self, tmp_path):
        csv = tmp_path / "a.csv"
        cfg = write_config(tmp_path, model="breuer", omega_tau_d=1000.0,
                           t_end=100.0, dt=0.05, sample_every=200,
                           csv_out=str(csv), json_out=str(tmp_path / "a.json"))
        assert main(["analytic", "--config", cfg]) == 0
        rows = csv.read_text().strip().splitlines()
        assert rows[0] == "t_omega,p00,abs_coh01,p11"
        t, p00, coh, p11 = map(float, rows[-1].split(","))
        assert p00 == pytest.approx(1 - 0.125 * t / 1000.0)
        assert coh == pytest.approx(0.5 * (1 - 0.375 * t / 1000.0))
