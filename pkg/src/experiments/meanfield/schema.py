from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from dynamics.dde_integrator import IntegratorConfig
from dynamics.meanfield import DatumSpec

from ..scenarios.schema import InfluenceSpec

#################################################
#### SHARED RUN SETTINGS ####
#################################################


class KineticRun(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: float = Field(default=0.25, gt=0)
    t_max: float = Field(default=5.0, gt=0)
    seed: int = Field(default=0, ge=0)
    dt: Optional[float] = Field(default=None, gt=0)
    scheme: Literal["euler", "rk4"] = "euler"
    record_stride: int = Field(default=10, ge=1)
    normalization: Literal["exclude_self", "include_all"] = "include_all"
    psi: InfluenceSpec = InfluenceSpec(family="exponential")
    datum: DatumSpec = DatumSpec()
    workers: int = Field(default=1, ge=1)

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(
            dt=self.dt,
            scheme=self.scheme,
            t_max=self.t_max,
            record_stride=self.record_stride,
            normalization=self.normalization,
        )


#################################################
#### CONVERGENCE STUDY SCHEMA ####
#################################################


class ConvergeRequest(KineticRun):
    n_list: List[int] = Field(default=[16, 32, 64, 128], min_length=1)


#################################################
#### STABILITY STUDY SCHEMA ####
#################################################


class StabilityRequest(KineticRun):
    t_max: float = Field(default=10.0, gt=0)
    n_agents: int = Field(default=16, ge=2)
    epsilon: float = Field(default=1e-3, ge=0)
    target: Literal["velocity", "position"] = "velocity"
