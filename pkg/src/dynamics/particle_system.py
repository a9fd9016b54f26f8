import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist

from helper.custom_errors import (ConfigurationError, DomainError,
                                  OutOfRangeError)
from models.base import frozen_array

from .influence import InfluenceFunction, eval_psi

TIME_TOL = 1e-9
CONSISTENCY_TOL = 1e-9


def as_agent_array(values: ArrayLike) -> NDArray[np.float64]:
    """(N, d) float array; a flat list is read as N scalars."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DomainError(f"expected N vectors, got an array of shape {arr.shape}")
    return arr


#################################################
#### SYSTEM STATE ####
#################################################


@dataclass(frozen=True)
class SystemState:
    t: float
    positions: NDArray[np.float64]
    velocities: NDArray[np.float64]

    def __post_init__(self):
        positions = as_agent_array(self.positions)
        velocities = as_agent_array(self.velocities)
        if positions.shape != velocities.shape:
            raise DomainError(
                f"positions {positions.shape} and velocities {velocities.shape} differ in shape"
            )
        if positions.shape[1] not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {positions.shape[1]}")
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(velocities))):
            raise DomainError(f"non-finite state at t={self.t}")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "positions", frozen_array(positions))
        object.__setattr__(self, "velocities", frozen_array(velocities))

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


#################################################
#### INITIAL HISTORIES ####
#################################################


class InitialHistory(ABC):
    """Prescribed positions and velocities on [-tau, 0]."""

    tau: float

    @property
    @abstractmethod
    def n_agents(self) -> int: ...

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @property
    @abstractmethod
    def consistent(self) -> bool:
        """Whether positions are the time integral of velocities on [-tau, 0]."""

    @abstractmethod
    def sample(self, s: float) -> SystemState: ...

    @abstractmethod
    def speed_bound(self) -> float:
        """Exact max_i |v_i(s)| over [-tau, 0]."""

    def _check_time(self, s: float) -> float:
        tol = TIME_TOL * max(1.0, self.tau)
        if not (-self.tau - tol <= s <= tol):
            raise OutOfRangeError(
                f"history queried at s={s}, outside [{-self.tau}, 0]"
            )
        return min(max(s, -self.tau), 0.0)


@dataclass(frozen=True)
class ConstantVelocityHistory(InitialHistory):
    """x_i(s) = anchor_i + v_i s with constant velocities."""

    tau: float
    velocities: NDArray[np.float64]
    anchors: Optional[NDArray[np.float64]] = None

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigurationError(f"tau must be positive, got {self.tau}", fields=["tau"])
        velocities = as_agent_array(self.velocities)
        if velocities.shape[0] < 2:
            raise ConfigurationError(
                "at least two agents are needed", fields=["history.velocities"]
            )
        if velocities.shape[1] not in (1, 2, 3):
            raise ConfigurationError(
                f"dimension must be 1, 2 or 3, got {velocities.shape[1]}",
                fields=["history.velocities"],
            )
        anchors = (
            np.zeros_like(velocities)
            if self.anchors is None
            else as_agent_array(self.anchors)
        )
        if anchors.shape != velocities.shape:
            raise ConfigurationError(
                f"anchors {anchors.shape} do not match velocities {velocities.shape}",
                fields=["history.anchors"],
            )
        if not (np.all(np.isfinite(velocities)) and np.all(np.isfinite(anchors))):
            raise ConfigurationError("history must be finite", fields=["history"])
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "velocities", frozen_array(velocities))
        object.__setattr__(self, "anchors", frozen_array(anchors))

    @property
    def n_agents(self) -> int:
        return self.velocities.shape[0]

    @property
    def dim(self) -> int:
        return self.velocities.shape[1]

    @property
    def consistent(self) -> bool:
        return True

    def sample(self, s: float) -> SystemState:
        s = self._check_time(s)
        return SystemState(s, self.anchors + s * self.velocities, self.velocities)

    def speed_bound(self) -> float:
        return float(np.max(np.linalg.norm(self.velocities, axis=1)))


@dataclass(frozen=True)
class TabulatedHistory(InitialHistory):
    """Dense samples on [-tau, 0], linearly interpolated in time."""

    tau: float
    times: NDArray[np.float64]
    positions: NDArray[np.float64]
    velocities: NDArray[np.float64]
    _consistent: bool = field(init=False, repr=False, default=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        positions = np.asarray(self.positions, dtype=np.float64)
        velocities = np.asarray(self.velocities, dtype=np.float64)
        if positions.ndim == 2:
            positions = positions[:, :, None]
        if velocities.ndim == 2:
            velocities = velocities[:, :, None]

        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise ConfigurationError(
                "history times must be strictly increasing with at least two samples",
                fields=["history.times"],
            )
        if positions.shape != velocities.shape or positions.shape[0] != times.size:
            raise ConfigurationError(
                "history positions and velocities must be (M, N, d) with M sample times",
                fields=["history.positions", "history.velocities"],
            )
        if positions.shape[1] < 2 or positions.shape[2] not in (1, 2, 3):
            raise ConfigurationError(
                f"unsupported history shape {positions.shape}", fields=["history"]
            )
        tol = TIME_TOL * max(1.0, self.tau)
        if times[0] > -self.tau + tol or times[-1] < -tol:
            raise ConfigurationError(
                f"history covers [{times[0]}, {times[-1]}], not [{-self.tau}, 0]",
                fields=["history.times"],
            )
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(velocities))):
            raise ConfigurationError("history must be finite", fields=["history"])

        # positions consistent with velocities when x(s) - x(s0) = int v by trapezoid
        increments = np.cumsum(
            0.5 * (velocities[1:] + velocities[:-1]) * np.diff(times)[:, None, None],
            axis=0,
        )
        drift = positions[1:] - positions[0] - increments
        scale = max(1.0, float(np.max(np.abs(positions))))
        consistent = bool(np.max(np.abs(drift)) <= CONSISTENCY_TOL * scale)

        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "times", frozen_array(times))
        object.__setattr__(self, "positions", frozen_array(positions))
        object.__setattr__(self, "velocities", frozen_array(velocities))
        object.__setattr__(self, "_consistent", consistent)

    @property
    def n_agents(self) -> int:
        return self.positions.shape[1]

    @property
    def dim(self) -> int:
        return self.positions.shape[2]

    @property
    def consistent(self) -> bool:
        return self._consistent

    def sample(self, s: float) -> SystemState:
        s = self._check_time(s)
        k = int(np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, self.times.size - 2))
        t0, t1 = self.times[k], self.times[k + 1]
        frac = (s - t0) / (t1 - t0)
        return SystemState(
            s,
            (1 - frac) * self.positions[k] + frac * self.positions[k + 1],
            (1 - frac) * self.velocities[k] + frac * self.velocities[k + 1],
        )

    def speed_bound(self) -> float:
        # |v| is convex along each linear segment, so nodes and endpoints suffice
        inside = (self.times >= -self.tau) & (self.times <= 0.0)
        speeds = [np.linalg.norm(self.velocities[inside], axis=2).max(initial=0.0)]
        for s in (-self.tau, 0.0):
            speeds.append(np.linalg.norm(self.sample(s).velocities, axis=1).max())
        return float(max(speeds))


#################################################
#### WEIGHTS AND RIGHT-HAND SIDE ####
#################################################


def communication_weights(
    positions_now: ArrayLike,
    positions_delayed: ArrayLike,
    psi: InfluenceFunction,
    include_self: bool = False,
) -> NDArray[np.float64]:
    """Row-stochastic weights psi(|x_k(t - tau) - x_i(t)|) / sum_j psi(...).

    With include_self the own delayed copy enters both sums; otherwise the
    diagonal is zero and the denominator runs over j != i.
    """
    now = as_agent_array(positions_now)
    delayed = as_agent_array(positions_delayed)
    if now.shape != delayed.shape:
        raise DomainError(
            f"current {now.shape} and delayed {delayed.shape} positions differ in shape"
        )
    if now.shape[0] < 2 and not include_self:
        raise ConfigurationError("weights need at least two agents")

    kernel = eval_psi(psi, cdist(now, delayed))
    kernel = np.atleast_2d(kernel)
    if not include_self:
        np.fill_diagonal(kernel, 0.0)
    return kernel / kernel.sum(axis=1, keepdims=True)


def relaxation_form(
    weights: NDArray[np.float64],
    velocities_now: ArrayLike,
    velocities_delayed: ArrayLike,
) -> NDArray[np.float64]:
    """sum_k phi_ik v_k(t - tau) - v_i(t), valid for row-stochastic weights."""
    return weights @ as_agent_array(velocities_delayed) - as_agent_array(velocities_now)


def rhs(
    state_now: SystemState,
    state_delayed: SystemState,
    psi: InfluenceFunction,
    tau: Optional[float] = None,
    include_self: bool = False,
) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    if state_now.positions.shape != state_delayed.positions.shape:
        raise DomainError(
            f"state shapes {state_now.positions.shape} and "
            f"{state_delayed.positions.shape} differ"
        )
    if tau is not None:
        lag = state_now.t - state_delayed.t
        if abs(lag - tau) > TIME_TOL * max(1.0, tau):
            raise DomainError(f"delayed state lags by {lag}, expected tau={tau}")

    weights = communication_weights(
        state_now.positions, state_delayed.positions, psi, include_self=include_self
    )
    differences = state_delayed.velocities[None, :, :] - state_now.velocities[:, None, :]
    dv = np.einsum("ik,ikd->id", weights, differences)
    return state_now.velocities.copy(), dv


def nearest_neighbor_weight_bound(positions: ArrayLike, psi: InfluenceFunction) -> bool:
    """Undelayed three-agent weights: every agent gives some neighbour at least 1/2."""
    positions = as_agent_array(positions)
    if positions.shape[0] != 3:
        raise DomainError(f"needs exactly three agents, got {positions.shape[0]}")
    weights = communication_weights(positions, positions, psi)
    return bool(np.all(weights.max(axis=1) >= 0.5))
