from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from dynamics.dde_integrator import IntegratorConfig, load_tabulated_history
from dynamics.influence import InfluenceFunction
from dynamics.particle_system import ConstantVelocityHistory, InitialHistory


class FrozenSchema(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


#################################################
#### INFLUENCE FUNCTION SCHEMA ####
#################################################


class InfluenceSpec(FrozenSchema):
    family: Literal["exponential", "cucker_smale", "constant", "tabulated"]
    beta: Optional[float] = Field(default=None, gt=0)
    grid: Optional[List[float]] = None
    values: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_family(self) -> "InfluenceSpec":
        if self.family == "cucker_smale" and self.beta is None:
            raise ValueError("cucker_smale needs beta")
        if self.family == "tabulated":
            if not self.grid or not self.values or len(self.grid) != len(self.values):
                raise ValueError("tabulated needs equally long grid and values")
        return self

    def build(self) -> InfluenceFunction:
        return InfluenceFunction.from_spec(self.model_dump(exclude_none=True))


#################################################
#### INITIAL HISTORY SCHEMA ####
#################################################


class HistorySpec(FrozenSchema):
    kind: Literal["constant_velocity", "tabulated"] = "constant_velocity"
    velocities: Optional[List[List[float]]] = None
    anchors: Optional[List[List[float]]] = None
    # x_i(s) = v_i (s + tau): every agent leaves the origin at s = -tau
    start_at_origin: bool = False
    path: Optional[str] = None

    @model_validator(mode="after")
    def check_kind(self) -> "HistorySpec":
        if self.kind == "tabulated":
            if not self.path:
                raise ValueError("tabulated history needs a path")
            return self
        if not self.velocities:
            raise ValueError("constant_velocity history needs velocities")
        shape = np.shape(self.velocities)
        if len(shape) != 2 or shape[0] < 2 or shape[1] not in (1, 2, 3):
            raise ValueError(
                "velocities must list at least two agents, each with 1 to 3 components"
            )
        if self.anchors is not None and np.shape(self.anchors) != shape:
            raise ValueError("anchors must match velocities in shape")
        if self.anchors is not None and self.start_at_origin:
            raise ValueError("anchors and start_at_origin are mutually exclusive")
        return self

    def build(self, tau: float) -> InitialHistory:
        if self.kind == "tabulated":
            return load_tabulated_history(self.path, tau)
        anchors = self.anchors
        if self.start_at_origin:
            anchors = (tau * np.asarray(self.velocities, dtype=float)).tolist()
        return ConstantVelocityHistory(tau=tau, velocities=self.velocities, anchors=anchors)


#################################################
#### SCENARIO SCHEMA ####
#################################################


class ThresholdSpec(FrozenSchema):
    # absolute eps_flock wins over the relative one
    eps_flock: Optional[float] = Field(default=None, gt=0)
    eps_flock_relative: float = Field(default=1e-6, gt=0)
    t_tail: Optional[float] = Field(default=None, ge=0)
    prominence_relative: float = Field(default=1e-3, gt=0)


class ScenarioConfig(FrozenSchema):
    name: str = Field(pattern=r"^[A-Za-z0-9_.\-]+$")
    tau: float = Field(gt=0)
    psi: InfluenceSpec
    history: HistorySpec
    integrator: IntegratorConfig
    thresholds: ThresholdSpec = ThresholdSpec()
    output_dir: Optional[str] = None
    description: Optional[str] = None

    @property
    def n_agents(self) -> Optional[int]:
        if self.history.velocities is None:
            return None
        return len(self.history.velocities)

    @property
    def dim(self) -> Optional[int]:
        if self.history.velocities is None:
            return None
        return len(self.history.velocities[0])


#################################################
#### RUN SUMMARY SCHEMA ####
#################################################


class RunSummary(FrozenSchema):
    name: str
    n_agents: int
    dim: int
    tau: float
    dt: float
    scheme: str
    normalization: str
    R_v: float
    initial_velocity_diameter: float
    final_velocity_diameter: float
    max_spatial_diameter: float
    velocity_bound_excess: float
    lyapunov_max_increase: Optional[float] = None
    classification: dict
    profile: dict
    decay_fit: dict
    inequality_check: dict
