import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mecgame.errors import InvalidOverride, ScenarioFormatError
from mecgame.harness import (DEVICE_DEFAULTS, ExperimentSpec, Recipe,
                             ScenarioSpec, default_prices, generate_scenario,
                             load_scenario, run_experiment, save_scenario,
                             scenario_from_json, scenario_to_json,
                             validate_scenario)
from mecgame.games import IpoaParams
from mecgame.pricing import IspaParams
from mecgame.baselines import SocialOptParams
from mecgame.model import OspKind


class TestGenerateScenario:
    def test_deterministic(self):
        a = generate_scenario(ScenarioSpec(m=10, seed=42))
        b = generate_scenario(ScenarioSpec(m=10, seed=42))
        assert a == b

    def test_seed_changes_draws(self):
        a = generate_scenario(ScenarioSpec(m=10, seed=1))
        b = generate_scenario(ScenarioSpec(m=10, seed=2))
        assert a != b

    def test_adding_devices_keeps_existing_draws(self):
        small = generate_scenario(ScenarioSpec(m=10, seed=7))
        large = generate_scenario(ScenarioSpec(m=30, seed=7))
        assert small.devices == large.devices[:10]
        assert small.osps == large.osps

    def test_override_fixes_parameter_without_reshuffling(self):
        base = generate_scenario(ScenarioSpec(m=10, seed=7))
        fixed = generate_scenario(ScenarioSpec(
            m=10, seed=7, overrides={"eps_tx_w": 0.4}))
        for dev_a, dev_b in zip(base.devices, fixed.devices):
            assert dev_b.eps_tx == 0.4
            assert dev_b.f_md == dev_a.f_md
            assert dev_b.theta_d == dev_a.theta_d

    def test_fig3_shape(self):
        sc = generate_scenario(ScenarioSpec(m=50, n_cloud=1, n_edge=3,
                                            seed=1))
        assert sc.m == 50 and sc.n == 4
        assert sc.osps[0].kind is OspKind.CLOUD
        assert all(o.kind is OspKind.EDGE for o in sc.osps[1:])
        for dev in sc.devices:
            assert 3.0e8 <= dev.f_md <= 4.5e8
            assert 0.1 <= dev.eps_tx <= 1.0
            assert dev.lam == 25.0 / 60.0
            assert abs(dev.theta_d + dev.theta_e + dev.theta_p - 1.0) < 1e-12

    def test_range_override_draws_per_device(self):
        sc = generate_scenario(ScenarioSpec(
            m=20, seed=1, overrides={"lambda_tasks_per_min": [20.0, 29.0]}))
        lams = {d.lam for d in sc.devices}
        assert len(lams) > 1
        assert all(20.0 / 60 <= lam <= 29.0 / 60 for lam in lams)

    def test_unknown_override_rejected(self):
        with pytest.raises(InvalidOverride):
            generate_scenario(ScenarioSpec(
                m=2, seed=1, overrides={"frequency_thz": 1.0}))

    def test_bad_range_rejected(self):
        with pytest.raises(InvalidOverride):
            generate_scenario(ScenarioSpec(
                m=2, seed=1, overrides={"eps_tx_w": [1.0, 0.1]}))


class TestScenarioFiles:
    def test_round_trip(self, tmp_path):
        sc = generate_scenario(ScenarioSpec(m=5, seed=3))
        path = tmp_path / "scenario.json"
        save_scenario(sc, str(path))
        loaded = load_scenario(str(path))
        for a, b in zip(sc.devices, loaded.devices):
            assert a.lam == pytest.approx(b.lam, rel=1e-12)
            assert a.h == pytest.approx(b.h, rel=1e-12)
            assert a.theta_p == b.theta_p
        assert [o.kind for o in sc.osps] == [o.kind for o in loaded.osps]

    def test_unknown_field_rejected(self):
        sc = generate_scenario(ScenarioSpec(m=2, seed=3))
        doc = scenario_to_json(sc)
        doc["devices"][0]["mystery_field"] = 1.0
        with pytest.raises(ScenarioFormatError):
            scenario_from_json(doc)

    def test_missing_section_rejected(self):
        with pytest.raises(ScenarioFormatError):
            scenario_from_json({"devices": []})

    def test_native_units_convert(self):
        sc = generate_scenario(ScenarioSpec(m=1, seed=3))
        doc = scenario_to_json(sc)
        assert doc["devices"][0]["c_mcycles"] == 300.0
        assert doc["network"]["bandwidth_mhz"] == 100.0
        loaded = scenario_from_json(doc)
        assert loaded.devices[0].c == 3e8
        assert loaded.net.bandwidth_b == 1e8


class TestValidateScenario:
    def test_passes_on_generated_scenario(self):
        sc = generate_scenario(ScenarioSpec(m=6, n_cloud=1, n_edge=2, seed=9))
        report = validate_scenario(sc, points=8)
        assert report["passed"]
        assert report["worst_grad_rel_err"] <= 1e-5
        assert report["worst_hess_rel_err"] <= 1e-4
        assert report["min_hessian_eigenvalue"] >= -1e-9


class TestRunExperiment:
    def test_convergence_trace(self, tmp_path):
        spec = ExperimentSpec(
            recipe=Recipe.CONVERGENCE_TRACE,
            scenario=ScenarioSpec(m=8, seed=1, overrides={
                "lambda_tasks_per_min": 25.0, "eps_tx_w": 0.4}),
            ipoa=IpoaParams(max_outer_iters=60))
        outputs, failures = run_experiment(spec, str(tmp_path))
        assert not failures
        assert (tmp_path / "manifest.json").exists()
        assert (tmp_path / "ipoa_trace.jsonl").exists()
        csv_path = tmp_path / "convergence.csv"
        header = csv_path.read_text().splitlines()[0]
        assert header.startswith("round,disutility_md")

    def test_manifest_echoes_defaults_and_reproduces(self, tmp_path):
        spec = ExperimentSpec(
            recipe=Recipe.CONVERGENCE_TRACE,
            scenario=ScenarioSpec(m=5, seed=2),
            ipoa=IpoaParams(max_outer_iters=40))
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        run_experiment(spec, str(out_a))
        run_experiment(spec, str(out_b))
        for name in ("manifest.json", "ipoa_trace.jsonl", "convergence.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
        manifest = json.loads((out_a / "manifest.json").read_text())
        assert manifest["spec"]["ipoa"]["tau"] == IpoaParams().tau
        assert manifest["seed"] == 2
        assert "version" in manifest

    def test_poa_sweep_writes_units_in_header(self, tmp_path):
        spec = ExperimentSpec(
            recipe=Recipe.POA_SWEEP,
            scenario=ScenarioSpec(m=3, n_cloud=1, n_edge=1, seed=2),
            ipoa=IpoaParams(max_outer_iters=60),
            so=SocialOptParams(restarts=1, seed=0),
            sweep=(22.0, 26.0))
        outputs, failures = run_experiment(spec, str(tmp_path))
        assert not failures
        text = (tmp_path / "poa_sweep.csv").read_text().splitlines()
        assert text[0].split(",")[0] == "lambda_tasks_per_min"
        assert len(text) == 3

    def test_jsonl_summary_format(self, tmp_path):
        spec = ExperimentSpec(
            recipe=Recipe.CONVERGENCE_TRACE,
            scenario=ScenarioSpec(m=4, seed=2),
            ipoa=IpoaParams(max_outer_iters=40),
            out_format="jsonl")
        outputs, failures = run_experiment(spec, str(tmp_path))
        assert (tmp_path / "convergence.jsonl").exists()


class TestCli:
    def run_cli(self, *args):
        env = dict(os.environ)
        env.pop("MECGAME_OUT_DIR", None)
        return subprocess.run(
            [sys.executable, "-m", "mecgame.cli", *args],
            capture_output=True, text=True, env=env)

    def test_missing_config_exits_2(self, tmp_path):
        result = self.run_cli("ipoa", "--config",
                              str(tmp_path / "missing.json"))
        assert result.returncode == 2
        assert "does not exist" in result.stderr

    def test_generate_and_validate(self, tmp_path):
        out = str(tmp_path / "gen")
        result = self.run_cli("generate", "--seed", "1", "--m", "4",
                              "--out", out)
        assert result.returncode == 0
        scenario_path = os.path.join(out, "scenario.json")
        assert os.path.exists(scenario_path)
        result = self.run_cli("validate", "--scenario-file", scenario_path,
                              "--points", "4")
        assert result.returncode == 0
        assert "PASS" in result.stdout

    def test_bad_override_exits_2(self, tmp_path):
        result = self.run_cli("generate", "--seed", "1", "--m", "2",
                              "--override", "bogus_key=1", "--out",
                              str(tmp_path))
        assert result.returncode == 2

    def test_experiment_requires_recipe(self, tmp_path):
        result = self.run_cli("experiment", "--out", str(tmp_path))
        assert result.returncode == 2

    def test_out_dir_env_override(self, tmp_path):
        env_dir = tmp_path / "env_dir"
        env = dict(os.environ)
        env["MECGAME_OUT_DIR"] = str(env_dir)
        result = subprocess.run(
            [sys.executable, "-m", "mecgame.cli", "generate", "--seed", "1",
             "--m", "2", "--out", str(tmp_path / "ignored")],
            capture_output=True, text=True, env=env)
        assert result.returncode == 0
        assert (env_dir / "scenario.json").exists()
