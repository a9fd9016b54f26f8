from typing import List, Literal, Optional

from .base import Record

#################################################
#### INFLUENCE FUNCTION RECORDS ####
#################################################


class TailIntegral(Record):
    value: float
    method: Literal["analytic", "adaptive_quadrature"]
    abs_tol: Optional[float] = None
    truncation_radius: Optional[float] = None
    error_estimate: Optional[float] = None

    @property
    def divergent(self) -> bool:
        return self.value == float("inf")


class InfluenceViolation(Record):
    kind: Literal["positivity", "monotonicity", "normalization", "lipschitz", "grid"]
    index: Optional[int] = None
    s: Optional[float] = None
    detail: str


class InfluenceReport(Record):
    violations: List[InfluenceViolation] = []

    @property
    def passed(self) -> bool:
        return not self.violations

    def of_kind(self, kind: str) -> List[InfluenceViolation]:
        return [v for v in self.violations if v.kind == kind]


#################################################
#### FLOCKING CERTIFICATE ####
#################################################


class FlockingCertificate(Record):
    lhs: float
    rhs: float
    satisfied: bool
    d_star: Optional[float] = None
    psi_star: Optional[float] = None
    decay_rate_C: Optional[float] = None
    R_v: float
    lower_limit: float
    tau: float


#################################################
#### CHARACTERISTIC ROOTS ####
#################################################


class CharacteristicRoot(Record):
    mu: float
    sigma: float
    residual: float


class RootSearchResult(Record):
    tau: float
    requested: int
    roots: List[CharacteristicRoot]
    partial: bool
    # informational: sufficient decay condition for the two-particle difference
    small_delay_condition: bool


#################################################
#### TRAJECTORY ANALYSIS ####
#################################################


class DecayFit(Record):
    rate: Optional[float]
    t_start: float
    t_end: float
    points: int
    truncated: bool


class DecayProfile(Record):
    monotone: bool
    local_maxima: int
    sign_changes: Optional[int] = None


class BehaviorClass(Record):
    kind: Literal["flocking", "oscillatory", "non_flocking"]
    rate: Optional[float] = None
    final_velocity_diameter: float
    eps_flock: float


class InequalityCheck(Record):
    velocity_excess: Optional[float] = None
    spatial_excess: Optional[float] = None
    checked_points: int
    overlap: float


#################################################
#### MEAN-FIELD RECORDS ####
#################################################


class ForceFieldBounds(Record):
    radius: float
    lipschitz_x: float
    lipschitz_v: float
    sup_bound: float
    psi_floor: float


class ConvergenceSample(Record):
    N: int
    t: float
    d1: float


class ConvergenceSummary(Record):
    N: int
    max_d1: float
    t_at_max: Optional[float] = None


class ConvergenceStudy(Record):
    seed: int
    reference_size: int
    tau: float
    t_final: float
    summary: List[ConvergenceSummary] = []
    samples: List[ConvergenceSample] = []


class StabilityReport(Record):
    epsilon: float
    target: Literal["velocity", "position"]
    seed: int
    initial_distance: float
    times: List[float]
    ratios: List[float]
    log_slope: Optional[float] = None
    envelope_rate: Optional[float] = None


#################################################
#### EXPERIMENT RECORDS ####
#################################################


class SweepRow(Record):
    parameter: Literal["tau", "dt", "beta"]
    value: float
    kind: Optional[Literal["flocking", "oscillatory", "non_flocking"]] = None
    rate: Optional[float] = None
    monotone: Optional[bool] = None
    local_maxima: Optional[int] = None
    sign_changes: Optional[int] = None
    certificate_satisfied: Optional[bool] = None
    error: Optional[str] = None
