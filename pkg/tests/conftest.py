import numpy as np
import pytest

from dynamics.dde_integrator import IntegratorConfig, integrate
from dynamics.influence import InfluenceFunction
from dynamics.particle_system import ConstantVelocityHistory


def constant_history(velocities, tau, anchors=None):
    return ConstantVelocityHistory(tau=tau, velocities=velocities, anchors=anchors)


def run(velocities, tau, psi=None, t_max=5.0, anchors=None, **options):
    """Integrate a constant-velocity history at the default tau / 100 step."""
    psi = psi or InfluenceFunction.exponential()
    cfg = IntegratorConfig(t_max=t_max, **options)
    return integrate(constant_history(velocities, tau, anchors), psi, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def exponential():
    return InfluenceFunction.exponential()


@pytest.fixture
def power_law():
    return InfluenceFunction.cucker_smale(4.0)


@pytest.fixture(scope="session")
def two_agents_small_delay():
    return run([[1.0], [-1.0]], 0.25, t_max=20.0)


@pytest.fixture(scope="session")
def two_agents_large_delay():
    return run([[1.0], [-1.0]], 1.0, t_max=20.0)


@pytest.fixture(scope="session")
def three_agents_small_delay():
    return run([[-10.0], [0.0], [20.0]], 0.25, t_max=15.0)
