"""Method-of-steps integration against closed forms and conserved quantities."""

import math

import numpy as np
import pandas as pd
import pytest

from conftest import constant_history, run
from dynamics.dde_integrator import (HistoryBuffer, IntegratorConfig,
                                     integrate, load_tabulated_history,
                                     sample_history, snap_step)
from dynamics.influence import InfluenceFunction
from dynamics.particle_system import ConstantVelocityHistory
from helper.custom_errors import (ConfigurationError, IntegrationBlowUpError,
                                  InvariantViolationError, OutOfRangeError)

TOL = 1e-12


def two_agent_difference(t, tau):
    """v_1 - v_2 for v = (1, -1) on [0, 2 tau], psi arbitrary (two agents)."""
    if t <= tau:
        return -2.0 + 4.0 * math.exp(-t)
    c = 4.0 * tau * math.exp(tau) - 4.0 * math.exp(tau) + 4.0
    return 2.0 + (c - 4.0 * math.exp(tau) * t) * math.exp(-t)


def endpoint_error(tau, m, scheme, t_end):
    trajectory = run([[1.0], [-1.0]], tau, t_max=t_end, dt=tau / m, scheme=scheme)
    w = trajectory.velocities[-1, 0, 0] - trajectory.velocities[-1, 1, 0]
    assert trajectory.times[-1] == pytest.approx(t_end, abs=1e-12)
    return abs(w - two_agent_difference(t_end, tau))


class TestStepAlignment:
    def test_snap_to_divisor_of_tau(self):
        dt, m = snap_step(0.003, 0.25)
        assert m == 84
        assert dt == pytest.approx(0.25 / 84)
        assert dt <= 0.003

    def test_exact_divisor_is_kept(self):
        assert snap_step(0.0025, 0.25) == (pytest.approx(0.0025), 100)

    def test_step_larger_than_delay(self):
        assert snap_step(2.0, 0.5) == (0.5, 1)

    def test_default_step_is_a_hundredth_of_tau(self):
        cfg = IntegratorConfig(t_max=1.0).aligned_to(0.5)
        assert cfg.dt == pytest.approx(0.005)


class TestHistoryBuffer:
    def filled(self):
        buffer = HistoryBuffer(tau=1.0, dt=0.25, n_agents=2, dim=1)
        for n in range(-4, 3):
            t = n * 0.25
            buffer.push(n, np.array([[t], [2 * t]]), np.array([[1.0], [2.0]]))
        return buffer

    def test_nodes_and_midpoints(self):
        buffer = self.filled()
        assert buffer.t == pytest.approx(0.5)
        np.testing.assert_allclose(buffer.node(-2).positions[:, 0], [-0.5, -1.0])
        np.testing.assert_allclose(buffer.sample(-0.375).positions[:, 0], [-0.375, -0.75], atol=TOL)

    def test_sample_history_reads_between_nodes(self):
        state = sample_history(self.filled(), 0.125)
        assert state.t == 0.125
        np.testing.assert_allclose(state.positions[:, 0], [0.125, 0.25], atol=TOL)
        np.testing.assert_allclose(state.velocities[:, 0], [1.0, 2.0], atol=TOL)

    def test_overwritten_nodes_are_out_of_range(self):
        buffer = self.filled()
        with pytest.raises(OutOfRangeError):
            buffer.node(-3)
        with pytest.raises(OutOfRangeError):
            buffer.sample(0.6)

    def test_nodes_must_arrive_in_order(self):
        buffer = self.filled()
        with pytest.raises(InvariantViolationError):
            buffer.push(5, np.zeros((2, 1)), np.zeros((2, 1)))

    def test_delay_must_be_a_multiple_of_the_step(self):
        with pytest.raises(ConfigurationError):
            HistoryBuffer(tau=1.0, dt=0.3, n_agents=2, dim=1)


class TestIntegration:
    def test_recorded_grid(self):
        trajectory = run([[1.0], [-1.0]], 0.25, t_max=1.0, record_stride=5)
        assert trajectory.times[0] == pytest.approx(-0.25, abs=TOL)
        assert np.count_nonzero(trajectory.history_mask) == 101
        forward = trajectory.times[~trajectory.history_mask]
        np.testing.assert_allclose(np.diff(forward), 5 * trajectory.dt, atol=1e-12)
        assert trajectory.t_end == pytest.approx(1.0)

    def test_first_euler_step(self):
        trajectory = run([[1.0], [-1.0]], 0.25, t_max=0.01)
        k = int(np.flatnonzero(trajectory.times > 0)[0])
        dt = trajectory.dt
        assert trajectory.velocities[k, 0, 0] == pytest.approx(1.0 - 2.0 * dt, abs=TOL)

    def test_consensus_keeps_velocities(self):
        trajectory = run([[0.5, -1.0]] * 3, 0.5, t_max=3.0, anchors=[[0, 0], [1, 0], [0, 2]])
        np.testing.assert_array_equal(trajectory.velocities[-1], [[0.5, -1.0]] * 3)
        np.testing.assert_allclose(
            trajectory.positions[-1], np.array([[0, 0], [1, 0], [0, 2]]) + 3.0 * np.array([0.5, -1.0]),
            atol=1e-10,
        )

    def test_two_agent_momentum_is_conserved(self):
        trajectory = run([[1.5], [-0.5]], 1.0, t_max=50.0, dt=1.0 / 64, scheme="rk4")
        total = trajectory.velocities[:, 0, 0] + trajectory.velocities[:, 1, 0]
        assert np.max(np.abs(total - 1.0)) <= 1e-10

    def test_small_delay_decays_monotonically(self, two_agents_small_delay):
        w = two_agents_small_delay.velocities[:, 0, 0] - two_agents_small_delay.velocities[:, 1, 0]
        forward = w[~two_agents_small_delay.history_mask]
        assert np.all(np.diff(forward) <= 0)
        assert np.all(forward > 0)

    def test_large_delay_changes_sign(self, two_agents_large_delay):
        w = two_agents_large_delay.velocities[:, 0, 0] - two_agents_large_delay.velocities[:, 1, 0]
        signs = np.sign(w[w != 0])
        assert np.count_nonzero(signs[1:] != signs[:-1]) >= 2

    def test_euler_is_first_order(self):
        coarse = endpoint_error(0.25, 50, "euler", 0.5)
        fine = endpoint_error(0.25, 100, "euler", 0.5)
        assert 1.7 <= coarse / fine <= 2.3

    def test_rk4_is_fourth_order_on_the_first_interval(self):
        coarse = endpoint_error(0.25, 4, "rk4", 0.25)
        fine = endpoint_error(0.25, 8, "rk4", 0.25)
        assert coarse / fine >= 12.0

    def test_rk4_beats_euler_past_the_first_interval(self):
        coarse = endpoint_error(0.25, 8, "rk4", 0.5)
        fine = endpoint_error(0.25, 16, "rk4", 0.5)
        assert coarse / fine >= 3.0
        assert fine < endpoint_error(0.25, 100, "euler", 0.5)

    def test_weight_checks_pass_along_a_run(self):
        run([[-10.0], [0.0], [20.0]], 0.25, t_max=1.0, check_weights=True)
        run([[-10.0], [0.0], [20.0]], 0.25, t_max=1.0, check_weights=True, normalization="include_all")

    def test_blow_up_reports_last_valid_time(self, exponential):
        history = ConstantVelocityHistory(tau=0.25, velocities=[[1e308], [-1e308]])
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(IntegrationBlowUpError) as caught:
                integrate(history, exponential, IntegratorConfig(t_max=1.0))
        assert caught.value.last_valid_time == 0.0


class TestTabulatedHistoryInput:
    def test_csv_history_reproduces_constant_velocity(self, tmp_path, exponential):
        tau = 0.25
        times = np.linspace(-tau, 0.0, 26)
        frame = pd.DataFrame(
            {
                "t": times,
                "x_1_1": times * 1.0,
                "x_2_1": times * -1.0,
                "v_1_1": np.ones_like(times),
                "v_2_1": -np.ones_like(times),
            }
        )
        path = tmp_path / "history.csv"
        frame.to_csv(path, index=False)

        tabulated = load_tabulated_history(path, tau)
        assert tabulated.consistent
        cfg = IntegratorConfig(t_max=2.0)
        from_file = integrate(tabulated, exponential, cfg)
        reference = integrate(constant_history([[1.0], [-1.0]], tau), exponential, cfg)
        np.testing.assert_allclose(from_file.velocities, reference.velocities, atol=1e-12)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_tabulated_history(tmp_path / "absent.csv", 1.0)

    def test_unmatched_columns(self, tmp_path):
        path = tmp_path / "history.csv"
        pd.DataFrame({"t": [-1.0, 0.0], "x_1_1": [0.0, 0.0], "v_2_1": [0.0, 0.0]}).to_csv(path, index=False)
        with pytest.raises(ConfigurationError):
            load_tabulated_history(path, 1.0)


def test_psi_does_not_matter_for_two_agents():
    constant = run([[1.0], [-1.0]], 1.0, psi=InfluenceFunction.constant(), t_max=5.0)
    power_law = run([[1.0], [-1.0]], 1.0, psi=InfluenceFunction.cucker_smale(4.0), t_max=5.0)
    np.testing.assert_array_equal(constant.velocities, power_law.velocities)
