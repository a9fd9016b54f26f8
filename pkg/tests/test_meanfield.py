"""Kinetic force field, Wasserstein-1 distances and particle approximation studies."""

import itertools

import numpy as np
import pytest

from conftest import constant_history, run
from dynamics.dde_integrator import IntegratorConfig
from dynamics.diagnostics import (check_flocking_condition,
                                  decay_envelope_excess)
from dynamics.influence import InfluenceFunction
from dynamics.meanfield import (DatumSpec, EmpiricalMeasure, ExcludeSelf,
                                MeasureHistory, assignment_distance,
                                bounded_lipschitz_gap, convergence_study,
                                empirical_from_trajectory, force_field_bounds,
                                kinetic_flocking_certificate,
                                measure_support_diameters, meanfield_force,
                                replicate, stability_ratio, wasserstein1,
                                wasserstein1_marginal,
                                wasserstein1_replicated, wasserstein1_sorted)
from dynamics.particle_system import SystemState, rhs
from helper.custom_errors import (ConfigurationError, DomainError,
                                  UnsupportedConfigurationError)
from settings.config import CONFIG

TOL = 1e-12
W1_TOL = 1e-10


def random_measure(rng, n, d):
    return EmpiricalMeasure(rng.normal(size=(n, d)), rng.normal(size=(n, d)))


def brute_force_distance(p, q):
    """Mean cost of the best permutation, by enumeration."""
    n = p.shape[0]
    cost = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=2)
    return min(cost[np.arange(n), list(perm)].mean() for perm in itertools.permutations(range(n)))


class TestEmpiricalMeasures:
    def test_from_two_agent_trajectory(self, two_agents_small_delay):
        measure = empirical_from_trajectory(two_agents_small_delay, 0.0)
        np.testing.assert_allclose(measure.phase_points, [[0.0, 1.0], [0.0, -1.0]], atol=TOL)

    def test_single_atom(self):
        measure = EmpiricalMeasure([[0.0]], [[1.0]])
        assert measure.size == 1
        assert measure_support_diameters(measure) == (0.0, 0.0)

    def test_support_diameters(self):
        measure = EmpiricalMeasure([[0.0], [3.0]], [[1.0], [-1.0]])
        assert measure_support_diameters(measure) == (3.0, 2.0)

    def test_history_from_constant_velocities(self):
        history = MeasureHistory.from_initial_history(constant_history([[-10.0], [0.0], [20.0]], 0.25))
        assert history.times[0] == -0.25 and history.times[-1] == 0.0
        assert measure_support_diameters(history.measures[-1]) == (0.0, 30.0)

    def test_mismatched_atoms(self):
        with pytest.raises(DomainError):
            EmpiricalMeasure([[0.0], [1.0]], [[0.0]])


class TestForceField:
    def test_consensus_gives_pure_relaxation(self, exponential):
        delayed = EmpiricalMeasure([[0.0], [1.0], [4.0]], [[2.0]] * 3)
        force = meanfield_force(delayed, [0.5], [0.5], exponential)
        np.testing.assert_allclose(force, [1.5], atol=TOL)

    def test_symmetric_pair(self, exponential):
        delayed = EmpiricalMeasure([[-1.0], [1.0]], [[1.0], [-1.0]])
        force = meanfield_force(delayed, [0.0], [0.25], exponential)
        np.testing.assert_allclose(force, [-0.25], atol=TOL)

    def test_excluding_self_reproduces_the_particle_system(self, power_law):
        trajectory = run([[-0.1], [0.0], [0.5], [0.6]], 0.25, psi=power_law, t_max=2.0)
        m = round(trajectory.tau / trajectory.dt)
        for k in range(m, trajectory.times.size, 37):
            now, lagged = trajectory.state(k), trajectory.state(k - m)
            _, dv = rhs(now, lagged, power_law)
            delayed = EmpiricalMeasure(lagged.positions, lagged.velocities)
            for i in range(trajectory.n_agents):
                force = meanfield_force(
                    delayed, now.positions[i], now.velocities[i], power_law, ExcludeSelf(i)
                )
                np.testing.assert_allclose(force, dv[i], atol=TOL)

    def test_self_inclusion_gap_shrinks_with_n(self, exponential):
        datum = DatumSpec(kind="uniform_alternating", dim=1)
        gaps = []
        for n in (8, 16, 32, 64):
            history = datum.build(n, 0.25, seed=7, reference_size=64)
            now, lagged = history.sample(0.0), history.sample(-0.25)
            delayed = EmpiricalMeasure(lagged.positions, lagged.velocities)
            _, dv = rhs(now, lagged, exponential)
            gap = max(
                float(np.abs(meanfield_force(delayed, now.positions[i], now.velocities[i], exponential) - dv[i]).max())
                for i in range(n)
            )
            gaps.append(gap)
        assert all(later <= 1.1 * earlier for earlier, later in zip(gaps, gaps[1:]))
        assert gaps[-1] < 0.5 * gaps[0]

    def test_wrong_dimension(self, exponential):
        delayed = EmpiricalMeasure([[0.0, 0.0]], [[1.0, 0.0]])
        with pytest.raises(DomainError):
            meanfield_force(delayed, [0.0], [0.0], exponential)

    @pytest.mark.parametrize("psi", [InfluenceFunction.exponential(), InfluenceFunction.cucker_smale(4.0)])
    def test_local_bounds(self, rng, psi):
        radius = 2.0
        bounds = force_field_bounds(psi, radius)

        def in_ball(count):
            direction = rng.normal(size=(count, 2))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            return direction * radius * rng.uniform(size=(count, 1)) ** 0.5

        for _ in range(200):
            atoms = in_ball(6)
            delayed = EmpiricalMeasure(atoms[:, :1], atoms[:, 1:])
            p, q = in_ball(2)
            fp = meanfield_force(delayed, p[:1], p[1:], psi)
            fq = meanfield_force(delayed, q[:1], q[1:], psi)
            allowed = bounds.lipschitz_x * abs(p[0] - q[0]) + bounds.lipschitz_v * abs(p[1] - q[1])
            assert float(np.abs(fp - fq).max()) <= allowed + TOL
            assert float(np.abs(fp).max()) <= bounds.sup_bound


class TestWasserstein:
    def test_identical_measures(self, rng):
        mu = random_measure(rng, 5, 2)
        assert wasserstein1(mu, mu) == 0.0

    def test_two_diracs(self):
        assert wasserstein1(EmpiricalMeasure([[0.0]], [[0.0]]), EmpiricalMeasure([[1.0]], [[0.0]])) == 1.0

    def test_shifted_pairs(self):
        assert wasserstein1_sorted([0.0, 2.0], [1.0, 3.0]) == 1.0
        assert assignment_distance([[0.0], [2.0]], [[1.0], [3.0]]) == 1.0

    def test_unequal_sizes_need_replication(self, rng):
        with pytest.raises(UnsupportedConfigurationError):
            wasserstein1(random_measure(rng, 3, 1), random_measure(rng, 4, 1))

    def test_matches_enumeration(self, rng):
        for _ in range(500):
            n, d = int(rng.integers(1, 7)), int(rng.integers(1, 3))
            mu, nu = random_measure(rng, n, d), random_measure(rng, n, d)
            assert wasserstein1(mu, nu) == pytest.approx(
                brute_force_distance(mu.phase_points, nu.phase_points), abs=W1_TOL
            )

    def test_symmetry_and_triangle_inequality(self, rng):
        for _ in range(500):
            n, d = int(rng.integers(1, 7)), int(rng.integers(1, 3))
            mu, nu, eta = (random_measure(rng, n, d) for _ in range(3))
            forward = wasserstein1(mu, nu)
            assert wasserstein1(nu, mu) == pytest.approx(forward, abs=1e-14)
            assert forward <= wasserstein1(mu, eta) + wasserstein1(eta, nu) + W1_TOL

    def test_sorting_agrees_with_assignment_in_one_dimension(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 30))
            a, b = rng.normal(size=n), rng.normal(size=n)
            assert wasserstein1_sorted(a, b) == pytest.approx(
                assignment_distance(a[:, None], b[:, None]), abs=TOL
            )

    def test_marginals(self):
        mu = EmpiricalMeasure([[0.0], [2.0]], [[1.0], [1.0]])
        nu = EmpiricalMeasure([[1.0], [3.0]], [[1.0], [1.0]])
        assert wasserstein1_marginal(mu, nu, "x") == 1.0
        assert wasserstein1_marginal(mu, nu, "v") == 0.0

    def test_bounded_lipschitz_gap_is_dominated(self, rng):
        for _ in range(200):
            n, d = int(rng.integers(1, 8)), int(rng.integers(1, 3))
            mu, nu = random_measure(rng, n, d), random_measure(rng, n, d)
            slopes = rng.normal(size=(4, 2 * d))
            slopes /= np.maximum(1.0, np.linalg.norm(slopes, axis=1, keepdims=True))
            offsets = rng.normal(size=4)

            def test_function(points):
                return np.max(points @ slopes.T + offsets, axis=1)

            assert bounded_lipschitz_gap(mu, nu, test_function) <= wasserstein1(mu, nu) + W1_TOL

    def test_replication_is_invisible(self, rng):
        mu = random_measure(rng, 4, 2)
        assert wasserstein1_replicated(mu, replicate(mu, 3)) == pytest.approx(0.0, abs=TOL)
        nu = random_measure(rng, 6, 2)
        assert wasserstein1_replicated(mu, nu) == pytest.approx(wasserstein1_replicated(nu, mu), abs=W1_TOL)

    def test_replication_cap(self, rng, monkeypatch):
        monkeypatch.setattr(CONFIG, "MAX_REPLICATED_ATOMS", 10)
        with pytest.raises(ConfigurationError):
            wasserstein1_replicated(random_measure(rng, 4, 1), random_measure(rng, 3, 1))


class TestKineticCertificate:
    @pytest.mark.parametrize(
        "velocities, tau, family",
        [
            ([[-10.0], [0.0], [20.0]], 0.25, "exponential"),
            ([[1.0], [0.9]], 0.1, "exponential"),
            ([[-0.1], [0.0], [0.5], [0.6]], 1.0, "constant"),
        ],
    )
    def test_equals_the_particle_certificate(self, velocities, tau, family):
        psi = InfluenceFunction.from_spec({"family": family})
        history = constant_history(velocities, tau)
        discrete = check_flocking_condition(history, psi)
        kinetic = kinetic_flocking_certificate(MeasureHistory.from_initial_history(history), psi)
        assert kinetic.satisfied == discrete.satisfied
        assert kinetic.lhs == pytest.approx(discrete.lhs, abs=TOL)
        assert kinetic.rhs == pytest.approx(discrete.rhs, abs=TOL)
        if discrete.satisfied:
            assert kinetic.decay_rate_C == pytest.approx(discrete.decay_rate_C, abs=TOL)

    def test_self_inclusive_flow_decays_at_the_certified_rate(self, exponential):
        history = constant_history([[1.0], [0.9], [0.95]], 0.1, anchors=[[0.1], [0.09], [0.095]])
        certificate = kinetic_flocking_certificate(MeasureHistory.from_initial_history(history), exponential)
        assert certificate.satisfied
        trajectory = run(
            [[1.0], [0.9], [0.95]], 0.1, t_max=10.0, anchors=[[0.1], [0.09], [0.095]],
            normalization="include_all",
        )
        assert decay_envelope_excess(trajectory, certificate.decay_rate_C) <= 5e-3


class TestInitialData:
    def test_prefixes_are_nested(self):
        datum = DatumSpec()
        small = datum.build(8, 0.25, seed=3, reference_size=32)
        large = datum.build(32, 0.25, seed=3)
        np.testing.assert_array_equal(small.anchors, large.anchors[:8])
        np.testing.assert_array_equal(small.velocities[:, 0], [1, -1] * 4)

    def test_replicated_tiles_the_base(self):
        datum = DatumSpec(kind="replicated", base_positions=[[0.0], [1.0]], base_velocities=[[1.0], [-1.0]])
        history = datum.build(6, 0.5, seed=0)
        np.testing.assert_array_equal(history.anchors[:, 0], [0, 1, 0, 1, 0, 1])
        with pytest.raises(ConfigurationError):
            datum.build(5, 0.5, seed=0)


class TestStudies:
    def test_single_size_gives_an_empty_study(self, exponential):
        study = convergence_study(DatumSpec(), [8], 1.0, seed=0, psi=exponential, tau=0.25)
        assert study.summary == [] and study.samples == []

    def test_sizes_must_increase(self, exponential):
        with pytest.raises(ConfigurationError):
            convergence_study(DatumSpec(), [16, 8], 1.0, seed=0, psi=exponential, tau=0.25)

    def test_replicated_data_converge_exactly(self, exponential, rng):
        base = rng.uniform(0.0, 1.0, size=(8, 1))
        datum = DatumSpec(
            kind="replicated",
            base_positions=base.tolist(),
            base_velocities=[[1.0], [-1.0]] * 4,
        )
        study = convergence_study(datum, [8, 16], 2.0, seed=0, psi=exponential, tau=0.25)
        assert study.summary[0].max_d1 <= W1_TOL

    def test_distance_to_the_reference_shrinks(self, exponential):
        cfg = IntegratorConfig(t_max=5.0, record_stride=10, normalization="include_all")
        study = convergence_study(
            DatumSpec(), [16, 32, 64, 128], 5.0, seed=11, psi=exponential, tau=0.25, cfg=cfg
        )
        worst = [row.max_d1 for row in study.summary]
        assert len(worst) == 3
        assert all(later <= 1.2 * earlier for earlier, later in zip(worst, worst[1:]))
        assert {sample.N for sample in study.samples} == {16, 32, 64}

    @pytest.mark.parametrize("epsilon", [1e-3, 1e-2])
    def test_stability_ratio_is_finite(self, exponential, epsilon):
        history = DatumSpec().build(16, 0.25, seed=5)
        cfg = IntegratorConfig(t_max=10.0, record_stride=10, normalization="include_all")
        report = stability_ratio(history, exponential, cfg, epsilon, seed=2)
        ratios = np.array(report.ratios)
        assert report.initial_distance > 0
        assert np.all(np.isfinite(ratios))
        assert report.log_slope is not None and np.isfinite(report.log_slope)
        assert report.envelope_rate is not None and report.envelope_rate >= 0

    def test_zero_perturbation(self, exponential):
        history = DatumSpec().build(8, 0.25, seed=5)
        report = stability_ratio(history, exponential, IntegratorConfig(t_max=1.0), 0.0)
        assert report.initial_distance == 0.0
        assert all(ratio == 0.0 for ratio in report.ratios)
        assert report.log_slope is None

    def test_position_perturbation(self, exponential):
        history = DatumSpec().build(8, 0.25, seed=5)
        cfg = IntegratorConfig(t_max=2.0, record_stride=10)
        report = stability_ratio(history, exponential, cfg, 1e-3, target="position", seed=1)
        assert np.all(np.isfinite(report.ratios))
