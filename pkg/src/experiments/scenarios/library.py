from typing import Dict, List, Optional

from dynamics.dde_integrator import IntegratorConfig

from .schema import HistorySpec, InfluenceSpec, ScenarioConfig, ThresholdSpec

###################################################
##### BUILTIN SCENARIOS ####
###################################################

# Constant velocities, all agents at the origin at s = -tau, explicit Euler at tau/100.

TWO_AGENTS = [[1.0], [-1.0]]
THREE_AGENTS = [[-10.0], [0.0], [20.0]]
FOUR_AGENTS = [[-0.1], [0.0], [0.5], [0.6]]


def _scenario(
    name: str,
    tau: float,
    velocities: List[List[float]],
    psi: InfluenceSpec,
    t_max: float,
    thresholds: ThresholdSpec,
    description: Optional[str] = None,
) -> ScenarioConfig:
    return ScenarioConfig(
        name=name,
        tau=tau,
        psi=psi,
        history=HistorySpec(kind="constant_velocity", velocities=velocities, start_at_origin=True),
        integrator=IntegratorConfig(dt=tau / 100, scheme="euler", t_max=t_max),
        thresholds=thresholds,
        description=description,
    )


def _build() -> Dict[str, ScenarioConfig]:
    exponential = InfluenceSpec(family="exponential")
    power_law = InfluenceSpec(family="cucker_smale", beta=4.0)
    scenarios = {}
    for label, tau in (("025", 0.25), ("1", 1.0)):
        scenarios[f"fig1_tau{label}"] = _scenario(
            f"fig1_tau{label}",
            tau,
            TWO_AGENTS,
            exponential,
            t_max=20.0,
            thresholds=ThresholdSpec(eps_flock_relative=1e-3),
            description="two agents, v = (1, -1); monotone decay for small delay, oscillation for large",
        )
        scenarios[f"fig2_tau{label}"] = _scenario(
            f"fig2_tau{label}",
            tau,
            THREE_AGENTS,
            exponential,
            t_max=15.0,
            thresholds=ThresholdSpec(eps_flock_relative=1e-3),
            description="three agents, v = (-10, 0, 20), psi(s) = exp(-s)",
        )
        scenarios[f"fig3_tau{label}"] = _scenario(
            f"fig3_tau{label}",
            tau,
            FOUR_AGENTS,
            power_law,
            t_max=60.0,
            thresholds=ThresholdSpec(eps_flock=1e-3),
            description="four agents, v = (-0.1, 0, 0.5, 0.6), psi(s) = (1 + s^2)^-4",
        )
    return scenarios


BUILTIN_SCENARIOS: Dict[str, ScenarioConfig] = _build()
