"""Empirical measures and the kinetic side of the flocking model.

Atomic data solve the kinetic equation exactly, so every kinetic quantity here
is computed from particle runs: forces on point clouds, Wasserstein-1
distances between clouds, and the stability and N -> infinity studies.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import optimize
from scipy.integrate import trapezoid
from scipy.spatial.distance import cdist, pdist

from helper.custom_errors import (ConfigurationError, DomainError,
                                  PositivityViolationError,
                                  UnsupportedConfigurationError)
from models.base import frozen_array
from models.reports import (ConvergenceSample, ConvergenceStudy,
                            ConvergenceSummary, FlockingCertificate,
                            ForceFieldBounds, StabilityReport)
from settings.config import CONFIG
from settings.logger import logger

from .dde_integrator import IntegratorConfig, Trajectory, integrate
from .diagnostics import certificate_from_budget, history_grid
from .influence import (TINY, InfluenceFunction, QuadratureConfig, eval_psi)
from .particle_system import (ConstantVelocityHistory, InitialHistory,
                              as_agent_array)

#################################################
#### EMPIRICAL MEASURES ####
#################################################


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Equal-weight atoms at (x_i, v_i), total mass one."""

    positions: NDArray[np.float64]
    velocities: NDArray[np.float64]

    def __post_init__(self):
        positions = as_agent_array(self.positions)
        velocities = as_agent_array(self.velocities)
        if positions.shape != velocities.shape or positions.shape[0] < 1:
            raise DomainError(
                f"a measure needs matching, nonempty atoms, got {positions.shape} "
                f"and {velocities.shape}"
            )
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(velocities))):
            raise DomainError("measure atoms must be finite")
        object.__setattr__(self, "positions", frozen_array(positions))
        object.__setattr__(self, "velocities", frozen_array(velocities))

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def phase_points(self) -> NDArray[np.float64]:
        return np.hstack((self.positions, self.velocities))


@dataclass(frozen=True)
class MeasureHistory:
    tau: float
    times: NDArray[np.float64]
    measures: Tuple[EmpiricalMeasure, ...]

    def __post_init__(self):
        times = frozen_array(self.times, ndim=1)
        measures = tuple(self.measures)
        if times.size != len(measures) or times.size < 2:
            raise ConfigurationError("one measure per grid node, at least two nodes")
        tol = 1e-9 * max(1.0, self.tau)
        if abs(times[0] + self.tau) > tol or abs(times[-1]) > tol or np.any(np.diff(times) <= 0):
            raise ConfigurationError(f"grid must increase from {-self.tau} to 0")
        shapes = {(m.size, m.dim) for m in measures}
        if len(shapes) != 1:
            raise ConfigurationError("all measures of a history must share N and d")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "measures", measures)

    @classmethod
    def from_initial_history(
        cls, history: InitialHistory, dt: Optional[float] = None
    ) -> "MeasureHistory":
        grid = history_grid(history.tau, dt)
        measures = []
        for s in grid:
            state = history.sample(s)
            measures.append(EmpiricalMeasure(state.positions, state.velocities))
        return cls(tau=history.tau, times=grid, measures=tuple(measures))


def empirical_from_trajectory(trajectory: Trajectory, t: float) -> EmpiricalMeasure:
    state = trajectory.state_at(t)
    return EmpiricalMeasure(state.positions, state.velocities)


def measure_support_diameters(measure: EmpiricalMeasure) -> Tuple[float, float]:
    if measure.size < 2:
        return 0.0, 0.0
    return float(pdist(measure.positions).max()), float(pdist(measure.velocities).max())


def support_radii(measure: EmpiricalMeasure) -> Tuple[float, float]:
    return (
        float(np.linalg.norm(measure.positions, axis=1).max()),
        float(np.linalg.norm(measure.velocities, axis=1).max()),
    )


def replicate(measure: EmpiricalMeasure, factor: int) -> EmpiricalMeasure:
    """Same measure with every atom repeated factor times."""
    if factor < 1:
        raise DomainError(f"replication factor must be positive, got {factor}")
    return EmpiricalMeasure(
        np.repeat(measure.positions, factor, axis=0),
        np.repeat(measure.velocities, factor, axis=0),
    )


#################################################
#### KINETIC FORCE FIELD ####
#################################################


@dataclass(frozen=True)
class IncludeAll:
    pass


@dataclass(frozen=True)
class ExcludeSelf:
    index: int


Normalization = Union[IncludeAll, ExcludeSelf]
INCLUDE_ALL = IncludeAll()


def meanfield_force(
    measure_delayed: EmpiricalMeasure,
    x: ArrayLike,
    v: ArrayLike,
    psi: InfluenceFunction,
    normalization: Normalization = INCLUDE_ALL,
) -> NDArray[np.float64]:
    """int psi(|x - y|)(w - v) df / int psi(|x - y|) df over the atoms."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if x.size != measure_delayed.dim or v.size != measure_delayed.dim:
        raise DomainError(
            f"point of dimension {x.size} against a measure of dimension {measure_delayed.dim}"
        )

    kernel = np.atleast_1d(
        eval_psi(psi, np.linalg.norm(measure_delayed.positions - x, axis=1))
    )
    if isinstance(normalization, ExcludeSelf):
        if not 0 <= normalization.index < measure_delayed.size:
            raise DomainError(f"atom {normalization.index} is not in the measure")
        kernel[normalization.index] = 0.0

    n = measure_delayed.size
    denominator = kernel.sum() / n
    if denominator < TINY:
        raise PositivityViolationError(
            f"force denominator {denominator} vanished at x={x.tolist()}"
        )
    numerator = (kernel[:, None] * (measure_delayed.velocities - v)).sum(axis=0) / n
    return numerator / denominator


def force_field_bounds(psi: InfluenceFunction, radius: float) -> ForceFieldBounds:
    """Local Lipschitz constants and sup bound of the force on B(0, R) in phase space."""
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    floor = eval_psi(psi, 2.0 * radius)
    sup = psi.sup_bound
    return ForceFieldBounds(
        radius=radius,
        lipschitz_x=2.0 * (radius + 1.0) * max(1.0, radius) * sup * psi.lipschitz_bound / floor**2,
        lipschitz_v=1.0,
        sup_bound=radius * (sup / floor + 1.0),
        psi_floor=floor,
    )


#################################################
#### WASSERSTEIN-1 ####
#################################################


def assignment_distance(p: ArrayLike, q: ArrayLike) -> float:
    """Optimal mean Euclidean cost over one-to-one matchings of equal-size clouds."""
    p = as_agent_array(p)
    q = as_agent_array(q)
    if p.shape[0] != q.shape[0]:
        raise UnsupportedConfigurationError(
            f"exact transport needs equal atom counts, got {p.shape[0]} and {q.shape[0]}"
        )
    if p.shape[1] != q.shape[1]:
        raise DomainError(f"clouds of dimension {p.shape[1]} and {q.shape[1]}")
    cost = cdist(p, q)
    rows, cols = optimize.linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def wasserstein1(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    return assignment_distance(mu.phase_points, nu.phase_points)


def wasserstein1_sorted(a: ArrayLike, b: ArrayLike) -> float:
    """Scalar clouds: matching sorted atoms is optimal."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size != b.size:
        raise UnsupportedConfigurationError(
            f"exact transport needs equal atom counts, got {a.size} and {b.size}"
        )
    return float(np.abs(a - b).mean())


def wasserstein1_marginal(
    mu: EmpiricalMeasure, nu: EmpiricalMeasure, component: Literal["x", "v"] = "v"
) -> float:
    p = mu.positions if component == "x" else mu.velocities
    q = nu.positions if component == "x" else nu.velocities
    if p.shape[1] == 1 and q.shape[1] == 1:
        return wasserstein1_sorted(p, q)
    return assignment_distance(p, q)


def wasserstein1_replicated(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Distance between clouds of different sizes, both padded to lcm(N, N')."""
    common = math.lcm(mu.size, nu.size)
    if common > CONFIG.MAX_REPLICATED_ATOMS:
        raise ConfigurationError(
            f"lcm({mu.size}, {nu.size}) = {common} exceeds MAX_REPLICATED_ATOMS="
            f"{CONFIG.MAX_REPLICATED_ATOMS}"
        )
    return wasserstein1(
        replicate(mu, common // mu.size), replicate(nu, common // nu.size)
    )


def bounded_lipschitz_gap(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    test_function: Callable[[NDArray], NDArray],
) -> float:
    """|int h dmu - int h dnu| for a test function acting row-wise on phase points."""
    return float(
        abs(
            np.mean(test_function(mu.phase_points))
            - np.mean(test_function(nu.phase_points))
        )
    )


#################################################
#### KINETIC FLOCKING CERTIFICATE ####
#################################################


def kinetic_flocking_certificate(
    history: MeasureHistory,
    psi: InfluenceFunction,
    cfg: Optional[QuadratureConfig] = None,
) -> FlockingCertificate:
    diameters = [measure_support_diameters(m) for m in history.measures]
    velocity = np.array([d_v for _, d_v in diameters])
    lhs = float(velocity[-1] + trapezoid(velocity, history.times))
    max_speed = max(support_radii(m)[1] for m in history.measures)
    return certificate_from_budget(
        lhs, diameters[0][0], max_speed, history.tau, psi, cfg
    )


#################################################
#### SAMPLED INITIAL DATA ####
#################################################


class DatumSpec(BaseModel):
    """Seeded constant-velocity initial data for particle approximations.

    uniform_alternating: positions uniform in [low, high]^d, velocities
    +-speed along the first axis by parity. Smaller clouds are prefixes of the
    reference cloud. replicated: a fixed base cloud repeated N / M times.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform_alternating", "replicated"] = "uniform_alternating"
    dim: int = Field(default=1, ge=1, le=3)
    low: float = 0.0
    high: float = 1.0
    speed: float = Field(default=1.0, ge=0)
    base_positions: Optional[List[List[float]]] = None
    base_velocities: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def check_kind(self) -> "DatumSpec":
        if self.kind == "replicated":
            if not self.base_positions or not self.base_velocities:
                raise ValueError("replicated data need base_positions and base_velocities")
            if np.shape(self.base_positions) != np.shape(self.base_velocities):
                raise ValueError("base_positions and base_velocities differ in shape")
        elif not self.high > self.low:
            raise ValueError("high must exceed low")
        return self

    def build(
        self, n_agents: int, tau: float, seed: int, reference_size: Optional[int] = None
    ) -> ConstantVelocityHistory:
        if self.kind == "replicated":
            base_x = as_agent_array(self.base_positions)
            base_v = as_agent_array(self.base_velocities)
            if n_agents % base_x.shape[0]:
                raise ConfigurationError(
                    f"N={n_agents} is not a multiple of the {base_x.shape[0]} base atoms",
                    fields=["datum.base_positions"],
                )
            factor = n_agents // base_x.shape[0]
            return ConstantVelocityHistory(
                tau=tau,
                velocities=np.tile(base_v, (factor, 1)),
                anchors=np.tile(base_x, (factor, 1)),
            )

        total = max(n_agents, reference_size or n_agents)
        rng = np.random.default_rng(seed)
        anchors = rng.uniform(self.low, self.high, size=(total, self.dim))[:n_agents]
        velocities = np.zeros((n_agents, self.dim))
        velocities[:, 0] = self.speed * np.where(np.arange(n_agents) % 2 == 0, 1.0, -1.0)
        return ConstantVelocityHistory(tau=tau, velocities=velocities, anchors=anchors)


#################################################
#### CONVERGENCE AND STABILITY STUDIES ####
#################################################


def _integrate_job(job: Tuple[InitialHistory, InfluenceFunction, IntegratorConfig]) -> Trajectory:
    return integrate(*job)


def _integrate_all(jobs: List[tuple], workers: int) -> List[Trajectory]:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_integrate_job, jobs))
    return [_integrate_job(job) for job in jobs]


def _forward_indices(trajectory: Trajectory) -> NDArray[np.int64]:
    return np.flatnonzero(trajectory.times >= -1e-9 * trajectory.dt)


def convergence_study(
    datum: DatumSpec,
    n_list: Sequence[int],
    t_final: float,
    seed: int,
    psi: InfluenceFunction,
    tau: float,
    cfg: Optional[IntegratorConfig] = None,
    workers: int = 1,
) -> ConvergenceStudy:
    """max over the recording grid of d_1(f^N_t, f^{N_max}_t) for each N < N_max."""
    sizes = [int(n) for n in n_list]
    if not sizes:
        raise ConfigurationError("n_list must not be empty", fields=["n_list"])
    if any(n < 1 for n in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigurationError(f"n_list must be strictly increasing, got {sizes}", fields=["n_list"])
    reference_size = sizes[-1]
    study = dict(seed=seed, reference_size=reference_size, tau=tau, t_final=t_final)
    if len(sizes) == 1:
        return ConvergenceStudy(**study)

    for n in sizes[:-1]:
        if math.lcm(n, reference_size) > CONFIG.MAX_REPLICATED_ATOMS:
            raise ConfigurationError(
                f"lcm({n}, {reference_size}) exceeds MAX_REPLICATED_ATOMS="
                f"{CONFIG.MAX_REPLICATED_ATOMS}",
                fields=["n_list"],
            )

    cfg = (cfg or IntegratorConfig(t_max=t_final, normalization="include_all")).model_copy(
        update={"t_max": t_final}
    )
    logger.info(
        f"[DELAYFLOCK] Convergence study N={sizes}, t_final={t_final}, seed={seed}, "
        f"normalization={cfg.normalization}"
    )
    jobs = [(datum.build(n, tau, seed, reference_size), psi, cfg) for n in sizes]
    trajectories = _integrate_all(jobs, workers)
    reference = trajectories[-1]
    indices = _forward_indices(reference)

    samples, summary = [], []
    for n, trajectory in zip(sizes[:-1], trajectories[:-1]):
        distances = []
        for k in indices:
            mu = EmpiricalMeasure(trajectory.positions[k], trajectory.velocities[k])
            nu = EmpiricalMeasure(reference.positions[k], reference.velocities[k])
            distance = wasserstein1_replicated(mu, nu)
            distances.append(distance)
            samples.append(ConvergenceSample(N=n, t=float(reference.times[k]), d1=distance))
        worst = int(np.argmax(distances))
        summary.append(
            ConvergenceSummary(
                N=n, max_d1=distances[worst], t_at_max=float(reference.times[indices[worst]])
            )
        )
        logger.info(f"[DELAYFLOCK] N={n}: max d1 = {distances[worst]:.6g}")
    return ConvergenceStudy(**study, summary=summary, samples=samples)


def perturb_history(
    history: ConstantVelocityHistory,
    epsilon: float,
    target: Literal["velocity", "position"] = "velocity",
    seed: int = 0,
) -> ConstantVelocityHistory:
    """Shift every agent's velocity (or anchor) by a seeded vector in [-eps, eps]^d."""
    rng = np.random.default_rng(seed)
    shift = epsilon * rng.uniform(-1.0, 1.0, size=history.velocities.shape)
    if target == "velocity":
        return ConstantVelocityHistory(history.tau, history.velocities + shift, history.anchors)
    return ConstantVelocityHistory(history.tau, history.velocities, history.anchors + shift)


def stability_series(
    history_a: InitialHistory,
    history_b: InitialHistory,
    psi: InfluenceFunction,
    cfg: IntegratorConfig,
    workers: int = 1,
) -> Tuple[float, NDArray[np.float64], NDArray[np.float64]]:
    """(max_s d_1 of the histories, recorded t >= 0, d_1 of the flows at t)."""
    if history_a.n_agents != history_b.n_agents:
        raise ConfigurationError("stability comparison needs equal agent counts")
    grid = history_grid(history_a.tau, cfg.dt)
    initial = 0.0
    for s in grid:
        a, b = history_a.sample(s), history_b.sample(s)
        initial = max(
            initial,
            wasserstein1(
                EmpiricalMeasure(a.positions, a.velocities),
                EmpiricalMeasure(b.positions, b.velocities),
            ),
        )

    first, second = _integrate_all([(history_a, psi, cfg), (history_b, psi, cfg)], workers)
    indices = _forward_indices(first)
    distances = np.array(
        [
            wasserstein1(
                EmpiricalMeasure(first.positions[k], first.velocities[k]),
                EmpiricalMeasure(second.positions[k], second.velocities[k]),
            )
            for k in indices
        ]
    )
    return initial, first.times[indices], distances


def stability_ratio(
    history: ConstantVelocityHistory,
    psi: InfluenceFunction,
    cfg: IntegratorConfig,
    epsilon: float,
    target: Literal["velocity", "position"] = "velocity",
    seed: int = 0,
    workers: int = 1,
) -> StabilityReport:
    """d_1 of two flows over the largest d_1 of their histories, along the run."""
    perturbed = perturb_history(history, epsilon, target, seed) if epsilon > 0 else history
    initial, times, distances = stability_series(history, perturbed, psi, cfg, workers)

    if initial > 0:
        ratios = distances / initial
    else:
        # identical data: read 0/0 as 0
        ratios = np.where(distances == 0, 0.0, np.inf)

    log_slope, envelope_rate = None, None
    usable = (ratios > 0) & np.isfinite(ratios) & (times > 0)
    if np.count_nonzero(usable) >= 2:
        log_slope = float(np.polyfit(times[usable], np.log(ratios[usable]), 1)[0])
        # smallest C with ratio <= exp(2 C t) on the grid
        envelope_rate = max(0.0, float(np.max(np.log(ratios[usable]) / (2.0 * times[usable]))))

    return StabilityReport(
        epsilon=epsilon,
        target=target,
        seed=seed,
        initial_distance=initial,
        times=times.tolist(),
        ratios=ratios.tolist(),
        log_slope=log_slope,
        envelope_rate=envelope_rate,
    )
