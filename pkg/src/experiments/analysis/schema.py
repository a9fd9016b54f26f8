from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

#################################################
#### CHARACTERISTIC ROOTS SCHEMA ####
#################################################


class RootsRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: float = Field(gt=0)
    count: int = Field(default=5, ge=1)


#################################################
#### CERTIFICATE SCHEMA ####
#################################################


class CertifyRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario: Optional[str] = None
    config: Optional[str] = None
    tau: Optional[float] = Field(default=None, gt=0)
    dt: Optional[float] = Field(default=None, gt=0)
