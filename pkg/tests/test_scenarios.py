"""Builtin scenarios, configuration handling, sweeps and exported bundles."""

import json

import numpy as np
import pytest

from experiments.scenarios.controllers import (apply_overrides, get_builtin,
                                               load_scenario, parse_scenario,
                                               run_scenario, sweep,
                                               write_sweep)
from experiments.scenarios.library import BUILTIN_SCENARIOS
from experiments.scenarios.schema import HistorySpec, ScenarioConfig
from helper.custom_errors import ConfigurationError

SCENARIOS = [f"fig{k}_tau{label}" for k in (1, 2, 3) for label in ("025", "1")]


@pytest.fixture(scope="module")
def bundles():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_scenario(get_builtin(name), write=False)
        return cache[name]

    return get


class TestScenarioConfig:
    def test_builtin_library(self):
        assert set(SCENARIOS) <= set(BUILTIN_SCENARIOS)
        for name in SCENARIOS:
            config = BUILTIN_SCENARIOS[name]
            assert config.integrator.dt == pytest.approx(config.tau / 100)
            assert config.integrator.scheme == "euler"

    @pytest.mark.parametrize("name", SCENARIOS)
    def test_json_round_trip(self, name):
        config = get_builtin(name)
        assert ScenarioConfig.model_validate_json(config.model_dump_json()) == config

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(get_builtin("fig2_tau1").model_dump_json(), encoding="utf-8")
        assert load_scenario(path) == get_builtin("fig2_tau1")

    def test_invalid_fields_are_named(self):
        raw = get_builtin("fig1_tau025").model_dump(mode="json")
        raw["tau"] = -1.0
        raw["colour"] = "blue"
        with pytest.raises(ConfigurationError) as caught:
            parse_scenario(raw)
        assert "tau" in caught.value.fields
        assert "colour" in caught.value.fields

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_scenario(tmp_path / "absent.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_scenario(broken)

    def test_unknown_builtin(self):
        with pytest.raises(ConfigurationError):
            get_builtin("fig9_tau1")

    def test_missing_history_file(self, tmp_path):
        spec = HistorySpec(kind="tabulated", path=str(tmp_path / "absent.csv"))
        with pytest.raises(ConfigurationError):
            spec.build(1.0)

    def test_overriding_tau_rescales_the_step(self):
        config = apply_overrides(get_builtin("fig1_tau025"), tau=1.0)
        assert config.tau == 1.0
        assert config.integrator.dt is None
        assert config.integrator.aligned_to(config.tau).dt == pytest.approx(0.01)

    def test_builtins_leave_the_origin_one_delay_before_start(self):
        config = get_builtin("fig2_tau1")
        history = config.history.build(config.tau)
        np.testing.assert_allclose(history.sample(-1.0).positions, 0.0, atol=1e-15)
        np.testing.assert_allclose(history.sample(0.0).positions[:, 0], [-10.0, 0.0, 20.0])
        shorter = apply_overrides(config, tau=0.25)
        np.testing.assert_allclose(
            shorter.history.build(shorter.tau).sample(0.0).positions[:, 0], [-2.5, 0.0, 5.0]
        )

    def test_anchors_exclude_start_at_origin(self):
        raw = get_builtin("fig1_tau025").model_dump(mode="json")
        raw["history"]["anchors"] = [[0.0], [1.0]]
        with pytest.raises(ConfigurationError) as caught:
            parse_scenario(raw)
        assert "history" in caught.value.fields

    def test_beta_needs_a_power_law(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(get_builtin("fig1_tau025"), beta=2.0)
        assert apply_overrides(get_builtin("fig3_tau1"), beta=2.0).psi.beta == 2.0


class TestBuiltinBehaviour:
    def test_two_agents_small_delay(self, bundles):
        bundle = bundles("fig1_tau025")
        dv = bundle.trajectory.velocity_diameters[~bundle.trajectory.history_mask]
        assert np.all(np.diff(dv) < 0)
        assert dv[-1] < 1e-4
        assert bundle.classification.kind == "flocking"
        assert bundle.profile.monotone and bundle.profile.sign_changes == 0

    def test_two_agents_large_delay(self, bundles):
        bundle = bundles("fig1_tau1")
        assert bundle.profile.sign_changes >= 2
        assert bundle.trajectory.velocity_diameters[-1] < bundle.trajectory.velocity_diameter_at(0.0)

    def test_three_agents_small_delay(self, bundles):
        bundle = bundles("fig2_tau025")
        assert bundle.classification.kind == "flocking"
        assert bundle.profile.monotone
        assert bundle.trajectory.velocity_diameters[-1] < 1e-3 * 30.0

    def test_three_agents_large_delay(self, bundles):
        bundle = bundles("fig2_tau1")
        assert bundle.classification.kind == "flocking"
        assert bundle.profile.local_maxima >= 1
        assert bundle.trajectory.velocity_diameters[-1] < 1e-3 * 30.0

    def test_four_agents_small_delay(self, bundles):
        bundle = bundles("fig3_tau025")
        assert bundle.classification.kind == "flocking"
        assert bundle.trajectory.velocity_diameters[-1] < 1e-3
        assert not bundle.certificate.satisfied

    def test_four_agents_large_delay_split_into_two_groups(self, bundles):
        bundle = bundles("fig3_tau1")
        assert bundle.classification.kind == "non_flocking"
        assert not bundle.certificate.satisfied
        v = bundle.trajectory.velocities[-1, :, 0]
        assert bundle.trajectory.velocity_diameters[-1] > 0.1
        assert abs(v[0] - v[1]) < 1e-2
        assert abs(v[2] - v[3]) < 1e-2
        assert v[:2].mean() == pytest.approx(0.2662, abs=2e-3)
        assert v[2:].mean() == pytest.approx(0.3986, abs=2e-3)

    def test_certificate_starts_from_collapsed_history(self, bundles):
        certificate = bundles("fig3_tau1").certificate
        assert certificate.R_v == pytest.approx(0.6)
        assert certificate.lower_limit == pytest.approx(0.6)

    @pytest.mark.parametrize("name", SCENARIOS)
    def test_weight_invariants_hold_on_every_step(self, name):
        raw = get_builtin(name).model_dump(mode="json")
        raw["integrator"]["check_weights"] = True
        bundle = run_scenario(parse_scenario(raw), write=False)
        assert bundle.trajectory.times[-1] == pytest.approx(raw["integrator"]["t_max"])

    @pytest.mark.parametrize("name", ["fig1_tau025", "fig2_tau025", "fig3_tau025"])
    def test_speed_never_exceeds_the_history_bound(self, bundles, name):
        assert bundles(name).summary.velocity_bound_excess <= 1e-12

    @pytest.mark.parametrize("name", ["fig1_tau025", "fig2_tau025"])
    def test_lyapunov_functional_does_not_grow(self, bundles, name):
        summary = bundles(name).summary
        assert summary.lyapunov_max_increase <= 1e-4 * summary.initial_velocity_diameter * (1 + summary.tau)


class TestExport:
    def test_bundle_files(self, tmp_path):
        config = apply_overrides(get_builtin("fig1_tau025"), t_max=2.0)
        bundle = run_scenario(config, out_dir=tmp_path)
        root = tmp_path / "fig1_tau025"
        for name in ("trajectory.csv", "trajectory.json", "diameters.csv", "diagnostics.json", "certificate.json"):
            assert (root / name).is_file()
        lines = (root / "trajectory.csv").read_bytes().split(b"\n")
        assert lines[0] == b"t,x_1_1,x_2_1,v_1_1,v_2_1"
        assert b"\r" not in lines[1]
        sidecar = json.loads((root / "trajectory.json").read_text(encoding="utf-8"))
        assert sidecar["tau"] == 0.25 and sidecar["psi"] == {"family": "exponential"}
        certificate = json.loads((root / "certificate.json").read_text(encoding="utf-8"))
        assert certificate["satisfied"] == bundle.certificate.satisfied

    def test_bundle_json_is_standard(self, tmp_path):
        raw = apply_overrides(get_builtin("fig2_tau025"), t_max=1.0).model_dump(mode="json")
        raw["psi"] = {"family": "constant"}
        run_scenario(parse_scenario(raw), out_dir=tmp_path)

        def reject(token):
            raise ValueError(token)

        root = tmp_path / raw["name"]
        certificate = json.loads((root / "certificate.json").read_text(encoding="utf-8"), parse_constant=reject)
        assert certificate["rhs"] == "Infinity"
        for name in ("diagnostics.json", "trajectory.json"):
            json.loads((root / name).read_text(encoding="utf-8"), parse_constant=reject)

    def test_runs_are_byte_identical(self, tmp_path):
        config = apply_overrides(get_builtin("fig2_tau025"), t_max=2.0)
        run_scenario(config, out_dir=tmp_path / "a")
        run_scenario(config, out_dir=tmp_path / "b")
        for name in ("trajectory.csv", "diameters.csv", "diagnostics.json"):
            first = (tmp_path / "a" / config.name / name).read_bytes()
            assert first == (tmp_path / "b" / config.name / name).read_bytes()


class TestSweep:
    def test_delay_sweep_separates_regimes(self):
        rows = sweep(get_builtin("fig1_tau025"), "tau", [0.25, 1.0])
        assert [row.value for row in rows] == [0.25, 1.0]
        assert rows[0].monotone and rows[0].sign_changes == 0
        assert rows[1].sign_changes >= 2
        assert all(row.error is None for row in rows)

    def test_step_sweep_is_consistent(self):
        rows = sweep(get_builtin("fig2_tau025"), "dt", [0.25 / 50, 0.25 / 100, 0.25 / 200])
        assert {row.kind for row in rows} == {"flocking"}

    def test_failures_are_recorded(self, tmp_path):
        base = apply_overrides(get_builtin("fig1_tau025"), t_max=1.0)
        rows = sweep(base, "beta", [2.0])
        assert rows[0].error is not None and rows[0].kind is None
        files = write_sweep(rows, base, "beta", tmp_path)
        assert files["table"].is_file() and files["sidecar"].is_file()

    def test_needs_values(self):
        with pytest.raises(ConfigurationError):
            sweep(get_builtin("fig1_tau025"), "tau", [])
