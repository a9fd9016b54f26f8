"""Method-of-steps integration of the delayed flocking system.

The step is snapped to tau / m for an integer m, so the delayed state at a
step boundary is always a stored node. Only the RK4 half-step stages read
interpolated history.
"""

import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import pdist

from helper.custom_errors import (ConfigurationError, IntegrationBlowUpError,
                                  InvariantViolationError, OutOfRangeError)
from models.base import frozen_array
from settings.config import CONFIG
from settings.logger import logger

from .influence import InfluenceFunction, eval_psi
from .particle_system import (TIME_TOL, InitialHistory, SystemState,
                              TabulatedHistory, communication_weights, rhs)

WEIGHT_TOL = 1e-12

DelayedLookup = Callable[[float], SystemState]


def snap_step(dt: float, tau: float) -> Tuple[float, int]:
    """Largest tau / m not exceeding dt, and m."""
    m = max(1, math.ceil(tau / dt - 1e-9))
    return tau / m, m


class IntegratorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    # None means tau / CONFIG.DELAY_DIVISIONS
    dt: Optional[float] = Field(default=None, gt=0)
    scheme: Literal["euler", "rk4"] = "euler"
    t_max: float = Field(gt=0)
    record_stride: int = Field(default=1, ge=1)
    normalization: Literal["exclude_self", "include_all"] = "exclude_self"
    check_weights: bool = False

    def aligned_to(self, tau: float) -> "IntegratorConfig":
        requested = self.dt if self.dt is not None else tau / CONFIG.DELAY_DIVISIONS
        dt, m = snap_step(requested, tau)
        if self.dt is not None and abs(dt - self.dt) > 1e-12 * self.dt:
            logger.warning(
                f"[DELAYFLOCK] dt={self.dt} snapped to tau/{m}={dt} for tau={tau}"
            )
        return self.model_copy(update={"dt": dt})

    @property
    def include_self(self) -> bool:
        return self.normalization == "include_all"


#################################################
#### HISTORY BUFFER ####
#################################################


class HistoryBuffer:
    """Ring of the last m + 1 grid nodes, node n sitting at time n * dt."""

    def __init__(self, tau: float, dt: float, n_agents: int, dim: int):
        self.tau = tau
        self.dt = dt
        self.delay_steps = round(tau / dt)
        if abs(self.delay_steps * dt - tau) > TIME_TOL * max(1.0, tau):
            raise ConfigurationError(f"tau={tau} is not a multiple of dt={dt}")
        self.capacity = self.delay_steps + 1
        self._x = np.empty((self.capacity, n_agents, dim))
        self._v = np.empty((self.capacity, n_agents, dim))
        self._head: Optional[int] = None

    @property
    def latest_index(self) -> int:
        if self._head is None:
            raise OutOfRangeError("history buffer is empty")
        return self._head

    @property
    def t(self) -> float:
        return self.latest_index * self.dt

    def push(self, index: int, positions: NDArray, velocities: NDArray) -> None:
        if self._head is not None and index != self._head + 1:
            raise InvariantViolationError(
                f"history node {index} pushed after node {self._head}"
            )
        slot = index % self.capacity
        self._x[slot] = positions
        self._v[slot] = velocities
        self._head = index

    def node(self, index: int) -> SystemState:
        head = self.latest_index
        if not head - self.delay_steps <= index <= head:
            raise OutOfRangeError(
                f"node {index} outside buffer coverage [{head - self.delay_steps}, {head}]"
            )
        slot = index % self.capacity
        return SystemState(index * self.dt, self._x[slot], self._v[slot])

    def sample(self, s: float) -> SystemState:
        """Stored node on the grid, linear interpolation between nodes."""
        head = self.latest_index
        k = s / self.dt
        if k < head - self.delay_steps - TIME_TOL or k > head + TIME_TOL:
            raise OutOfRangeError(
                f"s={s} outside buffer coverage [{self.t - self.tau}, {self.t}]"
            )
        nearest = round(k)
        if abs(k - nearest) <= TIME_TOL:
            return self.node(min(max(nearest, head - self.delay_steps), head))

        lower = math.floor(k)
        frac = k - lower
        a, b = self.node(lower), self.node(lower + 1)
        return SystemState(
            s,
            (1 - frac) * a.positions + frac * b.positions,
            (1 - frac) * a.velocities + frac * b.velocities,
        )


def sample_history(buffer: HistoryBuffer, s: float) -> SystemState:
    return buffer.sample(s)


#################################################
#### STEPPERS ####
#################################################


def _stage(t: float, positions: NDArray, velocities: NDArray, last_valid: float) -> SystemState:
    if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(velocities))):
        logger.error(f"[DELAYFLOCK] Non-finite state after t={last_valid}")
        raise IntegrationBlowUpError(
            f"non-finite state encountered after t={last_valid}",
            last_valid_time=last_valid,
        )
    return SystemState(t, positions, velocities)


def step_euler(
    state: SystemState,
    delayed: DelayedLookup,
    psi: InfluenceFunction,
    dt: float,
    include_self: bool = False,
) -> SystemState:
    dx, dv = rhs(state, delayed(state.t), psi, include_self=include_self)
    return _stage(
        state.t + dt,
        state.positions + dt * dx,
        state.velocities + dt * dv,
        state.t,
    )


def step_rk4(
    state: SystemState,
    delayed: DelayedLookup,
    psi: InfluenceFunction,
    dt: float,
    include_self: bool = False,
) -> SystemState:
    t, x, v = state.t, state.positions, state.velocities
    half = 0.5 * dt

    k1x, k1v = rhs(state, delayed(t), psi, include_self=include_self)
    s2 = _stage(t + half, x + half * k1x, v + half * k1v, t)
    k2x, k2v = rhs(s2, delayed(t + half), psi, include_self=include_self)
    s3 = _stage(t + half, x + half * k2x, v + half * k2v, t)
    k3x, k3v = rhs(s3, delayed(t + half), psi, include_self=include_self)
    s4 = _stage(t + dt, x + dt * k3x, v + dt * k3v, t)
    k4x, k4v = rhs(s4, delayed(t + dt), psi, include_self=include_self)

    return _stage(
        t + dt,
        x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
        v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v),
        t,
    )


STEPPERS = {"euler": step_euler, "rk4": step_rk4}


#################################################
#### TRAJECTORY ####
#################################################


def _diameters(points: NDArray) -> NDArray[np.float64]:
    if points.shape[1] < 2:
        return np.zeros(points.shape[0])
    return np.array([pdist(snapshot).max() for snapshot in points])


@dataclass(frozen=True)
class Trajectory:
    times: NDArray[np.float64]
    positions: NDArray[np.float64]
    velocities: NDArray[np.float64]
    tau: float
    dt: float
    config: IntegratorConfig
    psi: InfluenceFunction

    def __post_init__(self):
        object.__setattr__(self, "times", frozen_array(self.times, ndim=1))
        object.__setattr__(self, "positions", frozen_array(self.positions, ndim=3))
        object.__setattr__(self, "velocities", frozen_array(self.velocities, ndim=3))

    @property
    def n_agents(self) -> int:
        return self.positions.shape[1]

    @property
    def dim(self) -> int:
        return self.positions.shape[2]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @cached_property
    def history_mask(self) -> NDArray[np.bool_]:
        return self.times <= TIME_TOL * self.dt

    @cached_property
    def velocity_diameters(self) -> NDArray[np.float64]:
        return frozen_array(_diameters(self.velocities))

    @cached_property
    def spatial_diameters(self) -> NDArray[np.float64]:
        return frozen_array(_diameters(self.positions))

    @cached_property
    def speeds(self) -> NDArray[np.float64]:
        """max_i |v_i| per recorded time."""
        return frozen_array(np.linalg.norm(self.velocities, axis=2).max(axis=1))

    @cached_property
    def initial_speed_bound(self) -> float:
        return float(self.speeds[self.history_mask].max())

    def state(self, k: int) -> SystemState:
        return SystemState(self.times[k], self.positions[k], self.velocities[k])

    def _check_time(self, t: float) -> None:
        tol = TIME_TOL * max(1.0, self.tau)
        if not self.times[0] - tol <= t <= self.times[-1] + tol:
            raise OutOfRangeError(
                f"t={t} outside trajectory coverage [{self.times[0]}, {self.times[-1]}]"
            )

    def state_at(self, t: float) -> SystemState:
        self._check_time(t)
        k = int(np.clip(np.searchsorted(self.times, t) - 1, 0, self.times.size - 2))
        if abs(self.times[k + 1] - t) <= TIME_TOL * self.dt:
            return self.state(k + 1)
        frac = min(max((t - self.times[k]) / (self.times[k + 1] - self.times[k]), 0.0), 1.0)
        return SystemState(
            t,
            (1 - frac) * self.positions[k] + frac * self.positions[k + 1],
            (1 - frac) * self.velocities[k] + frac * self.velocities[k + 1],
        )

    def velocity_diameter_at(self, t: float) -> float:
        self._check_time(t)
        return float(np.interp(t, self.times, self.velocity_diameters))

    def spatial_diameter_at(self, t: float) -> float:
        self._check_time(t)
        return float(np.interp(t, self.times, self.spatial_diameters))

    def metadata(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "dim": self.dim,
            "tau": self.tau,
            "dt": self.dt,
            "scheme": self.config.scheme,
            "t_max": self.config.t_max,
            "record_stride": self.config.record_stride,
            "normalization": self.config.normalization,
            "psi": self.psi.to_spec(),
        }


#################################################
#### INTEGRATION ####
#################################################


def _check_weight_invariants(
    state: SystemState,
    delayed: SystemState,
    psi: InfluenceFunction,
    include_self: bool,
    lower_bound: Optional[float],
) -> None:
    weights = communication_weights(
        state.positions, delayed.positions, psi, include_self=include_self
    )
    if np.max(np.abs(weights.sum(axis=1) - 1.0)) > WEIGHT_TOL:
        raise InvariantViolationError(f"weight rows do not sum to one at t={state.t}")
    if np.any(weights < 0) or np.any(weights > 1 + WEIGHT_TOL):
        raise InvariantViolationError(f"weights outside [0, 1] at t={state.t}")
    if not include_self and np.any(np.diag(weights) != 0):
        raise InvariantViolationError(f"nonzero self weight at t={state.t}")
    if lower_bound is not None:
        off = weights[~np.eye(weights.shape[0], dtype=bool)]
        if off.min() < lower_bound - WEIGHT_TOL:
            raise InvariantViolationError(
                f"weight {off.min()} below {lower_bound} at t={state.t}"
            )


def integrate(
    history: InitialHistory, psi: InfluenceFunction, cfg: IntegratorConfig
) -> Trajectory:
    tau = history.tau
    cfg = cfg.aligned_to(tau)
    dt = cfg.dt
    buffer = HistoryBuffer(tau, dt, history.n_agents, history.dim)
    m = buffer.delay_steps
    stride = cfg.record_stride
    # whole number of strides so recorded times stay uniform
    n_steps = math.ceil(math.ceil(cfg.t_max / dt - 1e-9) / stride) * stride
    stepper = STEPPERS[cfg.scheme]

    logger.info(
        f"[DELAYFLOCK] Integrating N={history.n_agents}, d={history.dim}, tau={tau}, "
        f"dt={dt}, scheme={cfg.scheme}, steps={n_steps}"
    )

    times, xs, vs = [], [], []
    for n in range(-m, 1):
        node = history.sample(-tau if n == -m else n * dt)
        buffer.push(n, node.positions, node.velocities)
        times.append(n * dt)
        xs.append(node.positions)
        vs.append(node.velocities)

    speed_margin = history.speed_bound() * tau

    def delayed(t: float) -> SystemState:
        return buffer.sample(t - tau)

    state = buffer.node(0)
    for n in range(n_steps):
        if cfg.check_weights:
            lag = delayed(state.t)
            bound = None
            if history.consistent:
                reach = pdist(lag.positions).max() + speed_margin
                bound = eval_psi(psi, reach) / history.n_agents
            _check_weight_invariants(state, lag, psi, cfg.include_self, bound)

        advanced = stepper(state, delayed, psi, dt, include_self=cfg.include_self)
        buffer.push(n + 1, advanced.positions, advanced.velocities)
        state = buffer.node(n + 1)
        if (n + 1) % stride == 0:
            times.append(state.t)
            xs.append(state.positions)
            vs.append(state.velocities)

    logger.debug(f"[DELAYFLOCK] Finished at t={state.t} after {n_steps} steps")
    return Trajectory(
        times=np.array(times),
        positions=np.stack(xs),
        velocities=np.stack(vs),
        tau=tau,
        dt=dt,
        config=cfg,
        psi=psi,
    )


#################################################
#### TABULATED HISTORY INPUT ####
#################################################

_COLUMN = re.compile(r"^([xv])_(\d+)_(\d+)$")


def load_tabulated_history(path: str | Path, tau: float) -> TabulatedHistory:
    """Read a history CSV laid out like the trajectory export (t, x_i_k..., v_i_k...)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"history file {path} does not exist", fields=["history.path"])
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"cannot parse history file {path}: {e}", fields=["history.path"])

    if "t" not in frame.columns:
        raise ConfigurationError(f"{path} has no 't' column", fields=["history.path"])
    indices = {"x": set(), "v": set()}
    for column in frame.columns:
        match = _COLUMN.match(str(column).strip())
        if match:
            indices[match.group(1)].add((int(match.group(2)), int(match.group(3))))
    if not indices["x"] or indices["x"] != indices["v"]:
        raise ConfigurationError(
            f"{path} needs matching x_i_k and v_i_k columns", fields=["history.path"]
        )
    n_agents = max(i for i, _ in indices["x"])
    dim = max(k for _, k in indices["x"])
    if len(indices["x"]) != n_agents * dim:
        raise ConfigurationError(f"{path} is missing agent columns", fields=["history.path"])

    def block(prefix: str) -> NDArray:
        columns = [f"{prefix}_{i}_{k}" for i in range(1, n_agents + 1) for k in range(1, dim + 1)]
        return frame[columns].to_numpy(dtype=np.float64).reshape(-1, n_agents, dim)

    return TabulatedHistory(
        tau=tau,
        times=frame["t"].to_numpy(dtype=np.float64),
        positions=block("x"),
        velocities=block("v"),
    )
