import math
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, optimize, signal, special
from scipy.spatial.distance import pdist

from helper.custom_errors import (ConvergenceError, DomainError,
                                  OutOfRangeError)
from models.reports import (BehaviorClass, CharacteristicRoot, DecayFit,
                            DecayProfile, FlockingCertificate,
                            InequalityCheck, RootSearchResult)
from settings.config import CONFIG
from settings.logger import logger

from .dde_integrator import Trajectory, snap_step
from .influence import (InfluenceFunction, QuadratureConfig,
                        definite_integral, eval_psi, tail_integral)
from .particle_system import InitialHistory, SystemState, as_agent_array

ROOT_RESIDUAL_TOL = 1e-12
ROOT_DEDUP_TOL = 1e-9
HULL_TOL = 1e-12
DECAY_RATE_XTOL = 1e-15
FLOOR_RELATIVE = 1e-12


#################################################
#### DIAMETERS AND SPEED BOUND ####
#################################################


def _diameter(points: NDArray) -> float:
    if points.shape[0] < 2:
        return 0.0
    return float(pdist(points).max())


def spatial_diameter(state: SystemState) -> float:
    return _diameter(state.positions)


def velocity_diameter(state: SystemState) -> float:
    return _diameter(state.velocities)


def history_grid(tau: float, dt: Optional[float] = None) -> NDArray[np.float64]:
    """Uniform nodes on [-tau, 0] with a step dividing tau."""
    _, m = snap_step(dt if dt is not None else tau / CONFIG.DELAY_DIVISIONS, tau)
    grid = np.linspace(-tau, 0.0, m + 1)
    grid[-1] = 0.0
    return grid


def max_speed_rv(history: InitialHistory, dt: Optional[float] = None) -> float:
    """R_v: the largest speed on [-tau, 0]."""
    sampled = max(
        float(np.linalg.norm(history.sample(s).velocities, axis=1).max())
        for s in history_grid(history.tau, dt)
    )
    return max(sampled, history.speed_bound())


#################################################
#### FLOCKING CERTIFICATE ####
#################################################


def solve_decay_rate(a: float, tau: float) -> float:
    """Root in (0, 1] of 1 - C = (1 - a) exp(C tau)."""
    if not 0 < a <= 1:
        raise DomainError(f"contraction a must lie in (0, 1], got {a}")
    if not tau >= 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    if a == 1:
        return 1.0
    if tau == 0:
        return float(a)

    def gap(c: float) -> float:
        return 1.0 - c - (1.0 - a) * math.exp(c * tau)

    # gap(0) = a > 0 and gap(1) < 0; gap is strictly decreasing
    return float(optimize.bisect(gap, 0.0, 1.0, xtol=DECAY_RATE_XTOL, maxiter=200))


def _absorbing_radius(
    psi: InfluenceFunction, lower: float, budget: float, cfg: Optional[QuadratureConfig]
) -> float:
    """d with int_lower^d psi = budget."""
    if budget <= 0:
        return lower

    def excess(a: float) -> float:
        return definite_integral(psi, lower, a, cfg) - budget

    step = max(1.0, lower)
    upper = lower + step
    for _ in range(200):
        if excess(upper) >= 0:
            break
        step *= 2.0
        upper = lower + step
    else:
        raise ConvergenceError(
            f"no radius absorbs budget {budget} from {lower}", partial_value=upper
        )
    if excess(upper) == 0:
        return upper
    return float(optimize.bisect(excess, lower, upper, xtol=1e-13, maxiter=400))


def certificate_from_budget(
    lhs: float,
    spread: float,
    r_v: float,
    tau: float,
    psi: InfluenceFunction,
    cfg: Optional[QuadratureConfig] = None,
) -> FlockingCertificate:
    """Compare the velocity budget lhs with the tail of psi past spread + R_v tau."""
    lower = spread + r_v * tau
    rhs = tail_integral(psi, lower, cfg).value
    satisfied = lhs < rhs
    if not satisfied:
        return FlockingCertificate(
            lhs=lhs, rhs=rhs, satisfied=False, R_v=r_v, lower_limit=lower, tau=tau
        )

    d_star = _absorbing_radius(psi, lower, lhs, cfg)
    psi_star = eval_psi(psi, d_star)
    return FlockingCertificate(
        lhs=lhs,
        rhs=rhs,
        satisfied=True,
        d_star=d_star,
        psi_star=psi_star,
        decay_rate_C=solve_decay_rate(min(psi_star, 1.0), tau),
        R_v=r_v,
        lower_limit=lower,
        tau=tau,
    )


def check_flocking_condition(
    history: InitialHistory,
    psi: InfluenceFunction,
    dt: Optional[float] = None,
    cfg: Optional[QuadratureConfig] = None,
) -> FlockingCertificate:
    grid = history_grid(history.tau, dt)
    states = [history.sample(s) for s in grid]
    diameters = np.array([velocity_diameter(state) for state in states])
    lhs = float(diameters[-1] + integrate.trapezoid(diameters, grid))
    certificate = certificate_from_budget(
        lhs,
        spatial_diameter(states[0]),
        max_speed_rv(history, dt),
        history.tau,
        psi,
        cfg,
    )
    logger.debug(
        f"[DELAYFLOCK] Certificate lhs={certificate.lhs}, rhs={certificate.rhs}, "
        f"satisfied={certificate.satisfied}"
    )
    return certificate


#################################################
#### CHARACTERISTIC ROOTS ####
#################################################


def _characteristic(lam: complex, tau: float) -> complex:
    return lam + 1.0 + np.exp(-lam * tau)


def _polish_root(lam: complex, tau: float, maxiter: int = 100) -> Optional[complex]:
    """Damped Newton on lam + 1 + exp(-lam tau)."""
    with np.errstate(all="ignore"):
        value = _characteristic(lam, tau)
        for _ in range(maxiter):
            if not np.isfinite(value):
                return None
            slope = 1.0 - tau * np.exp(-lam * tau)
            if slope == 0 or not np.isfinite(slope):
                return None
            step = value / slope
            damping = 1.0
            for _ in range(40):
                candidate = lam - damping * step
                candidate_value = _characteristic(candidate, tau)
                if np.isfinite(candidate_value) and abs(candidate_value) < abs(value):
                    break
                damping *= 0.5
            else:
                return lam
            lam, value = candidate, candidate_value
            if abs(damping * step) <= 1e-16 * max(1.0, abs(lam)):
                break
    return complex(lam)


def characteristic_roots(tau: float, count: int = 5) -> RootSearchResult:
    """Rightmost roots of lam + 1 + exp(-lam tau) = 0, one per conjugate pair."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")

    seeds: List[complex] = [-1.0 + 0j, -2.0 + 0j]
    with np.errstate(all="ignore"):
        argument = -tau * math.exp(tau) if tau < 700 else -math.inf
        if math.isfinite(argument):
            # lam = -1 + W_k(-tau e^tau) / tau on every branch
            for k in range(-(count + 4), count + 5):
                seeds.append(-1.0 + complex(special.lambertw(argument, k)) / tau)
    for k in range(count + 5):
        seeds.append(complex(-1.0, (2 * k + 1) * math.pi / (2 * tau)))

    found: List[CharacteristicRoot] = []
    for seed in seeds:
        lam = _polish_root(seed, tau)
        if lam is None:
            continue
        residual = float(abs(_characteristic(lam, tau)))
        if not residual <= ROOT_RESIDUAL_TOL or lam.real > 0:
            continue
        mu, sigma = lam.real, abs(lam.imag)
        if any(abs(r.mu - mu) <= ROOT_DEDUP_TOL and abs(r.sigma - sigma) <= ROOT_DEDUP_TOL for r in found):
            continue
        found.append(CharacteristicRoot(mu=mu, sigma=sigma, residual=residual))

    found.sort(key=lambda r: (-r.mu, r.sigma))
    partial = len(found) < count
    if partial:
        logger.warning(
            f"[DELAYFLOCK] Only {len(found)} of {count} characteristic roots converged for tau={tau}"
        )
    return RootSearchResult(
        tau=tau,
        requested=count,
        roots=found[:count],
        partial=partial,
        small_delay_condition=tau < 1.0 / math.sqrt(2.0),
    )


#################################################
#### LYAPUNOV FUNCTIONAL ####
#################################################


def _window_integral(times: NDArray, values: NDArray, a: float, b: float) -> float:
    first, last = np.searchsorted(times, a, side="right"), np.searchsorted(times, b, side="left")
    knots = np.concatenate(([a], times[first:last], [b]))
    return float(integrate.trapezoid(np.interp(knots, times, values), knots))


def lyapunov(
    trajectory: Trajectory, t: float, cfg: Optional[QuadratureConfig] = None
) -> float:
    """d_V(t) + int_{a0}^{d_X(t - tau) + R_v tau} psi + int_{t - tau}^t d_V."""
    if t < 0:
        raise OutOfRangeError(f"the functional is defined for t >= 0, got {t}")
    tau = trajectory.tau
    margin = trajectory.initial_speed_bound * tau
    lower = trajectory.spatial_diameter_at(-tau) + margin
    upper = trajectory.spatial_diameter_at(t - tau) + margin
    return (
        trajectory.velocity_diameter_at(t)
        + definite_integral(trajectory.psi, lower, upper, cfg)
        + _window_integral(trajectory.times, trajectory.velocity_diameters, t - tau, t)
    )


def lyapunov_series(
    trajectory: Trajectory, cfg: Optional[QuadratureConfig] = None
) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    times = trajectory.times[~trajectory.history_mask]
    times = np.concatenate(([0.0], times))
    return times, np.array([lyapunov(trajectory, t, cfg) for t in times])


#################################################
#### BOUND CHECKS ALONG A TRAJECTORY ####
#################################################


def _forward(trajectory: Trajectory) -> NDArray[np.bool_]:
    return trajectory.times >= -1e-9 * trajectory.dt


def velocity_bound_excess(trajectory: Trajectory, r_v: Optional[float] = None) -> float:
    """max_i |v_i(t)| - R_v over t >= 0; positive means the bound is broken."""
    r_v = trajectory.initial_speed_bound if r_v is None else r_v
    return float(trajectory.speeds[_forward(trajectory)].max() - r_v)


def decay_envelope_excess(trajectory: Trajectory, rate: float) -> float:
    forward = _forward(trajectory)
    peak = float(trajectory.velocity_diameters[trajectory.history_mask].max())
    envelope = peak * np.exp(-rate * trajectory.times[forward])
    return float(np.max(trajectory.velocity_diameters[forward] - envelope))


def spread_excess(trajectory: Trajectory, d_star: float) -> float:
    """max_t d_X(t - tau) + R_v tau - d_star."""
    tau = trajectory.tau
    lagged = trajectory.times[_forward(trajectory)] - tau
    spreads = np.interp(lagged, trajectory.times, trajectory.spatial_diameters)
    return float(np.max(spreads) + trajectory.initial_speed_bound * tau - d_star)


def _extreme_pairs(points: NDArray) -> Tuple[NDArray, NDArray, NDArray]:
    """Diameter, index of the farthest pair and its difference vector per snapshot."""
    n = points.shape[1]
    rows, cols = np.triu_indices(n, k=1)
    diffs = points[:, rows, :] - points[:, cols, :]
    norms = np.linalg.norm(diffs, axis=2)
    pair = norms.argmax(axis=1)
    picked = np.arange(points.shape[0])
    return norms[picked, pair], pair, diffs[picked, pair]


def _smooth_points(pair: NDArray, diff: NDArray, diameter: NDArray, floor: float) -> NDArray:
    """Interior samples where the extreme pair and its orientation persist."""
    same_pair = (pair[:-2] == pair[1:-1]) & (pair[1:-1] == pair[2:])
    same_side = np.einsum("kd,kd->k", diff[:-2], diff[2:]) > 0
    alive = diameter[1:-1] > floor
    return np.flatnonzero(same_pair & same_side & alive) + 1


def dissipative_inequality_excess(
    trajectory: Trajectory, overlap: Optional[float] = None
) -> InequalityCheck:
    """Largest violation of the diameter differential inequalities on the grid.

    Velocity: d/dt d_V <= (1 - q psi(d_X(t - tau) + R_v tau)) d_V(t - tau) - d_V(t),
    where q is the guaranteed row overlap, 1 when every delayed copy including
    the own one is weighted, (N - 2) / N when the diagonal is zero.
    Space: d/dt d_X <= d_V. Derivatives are centred differences, taken only
    where the maximizing pair stays the same.
    """
    n = trajectory.n_agents
    if overlap is None:
        overlap = 1.0 if trajectory.config.include_self else (n - 2) / n
    if n < 2:
        return InequalityCheck(checked_points=0, overlap=overlap)

    forward = _forward(trajectory)
    times = trajectory.times[forward]
    tau = trajectory.tau
    margin = trajectory.initial_speed_bound * tau
    lagged = times - tau
    lag_dv = np.interp(lagged, trajectory.times, trajectory.velocity_diameters)
    lag_dx = np.interp(lagged, trajectory.times, trajectory.spatial_diameters)

    dv, v_pair, v_diff = _extreme_pairs(trajectory.velocities[forward])
    dx, x_pair, x_diff = _extreme_pairs(trajectory.positions[forward])
    floor = FLOOR_RELATIVE * max(1.0, trajectory.initial_speed_bound)

    v_points = _smooth_points(v_pair, v_diff, dv, floor)
    x_points = _smooth_points(x_pair, x_diff, dx, floor)

    def centred(values: NDArray, k: NDArray) -> NDArray:
        return (values[k + 1] - values[k - 1]) / (times[k + 1] - times[k - 1])

    velocity_excess = None
    if v_points.size:
        contraction = overlap * eval_psi(trajectory.psi, lag_dx[v_points] + margin)
        bound = (1.0 - contraction) * lag_dv[v_points] - dv[v_points]
        velocity_excess = float(np.max(centred(dv, v_points) - bound))

    spatial_excess = None
    if x_points.size:
        spatial_excess = float(np.max(centred(dx, x_points) - dv[x_points]))

    return InequalityCheck(
        velocity_excess=velocity_excess,
        spatial_excess=spatial_excess,
        checked_points=int(v_points.size),
        overlap=overlap,
    )


#################################################
#### DECAY FITS AND CLASSIFICATION ####
#################################################


def fit_log_slope(
    times: ArrayLike,
    values: ArrayLike,
    window: Optional[Tuple[float, float]] = None,
    floor: float = 0.0,
) -> DecayFit:
    """Least-squares rate of exponential decay, cut at the first value <= floor."""
    t = np.asarray(times, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if window is not None:
        inside = (t >= window[0]) & (t <= window[1])
        t, y = t[inside], y[inside]
    if t.size == 0:
        raise OutOfRangeError(f"no samples inside window {window}")

    t_start, t_end = float(t[0]), float(t[-1])
    truncated = False
    below = np.flatnonzero(y <= floor)
    if below.size:
        t, y = t[: below[0]], y[: below[0]]
        truncated = True
        logger.debug(f"[DELAYFLOCK] Decay fit truncated at floor {floor}")

    if t.size < 2:
        return DecayFit(rate=None, t_start=t_start, t_end=t_end, points=int(t.size), truncated=truncated)
    slope = np.polyfit(t, np.log(y), 1)[0]
    return DecayFit(
        rate=0.0 - float(slope),
        t_start=t_start,
        t_end=t_end,
        points=int(t.size),
        truncated=truncated,
    )


def _noise_floor(trajectory: Trajectory) -> float:
    return FLOOR_RELATIVE * max(
        trajectory.initial_speed_bound, float(trajectory.velocity_diameters.max())
    )


def fit_decay_rate(
    trajectory: Trajectory,
    window: Optional[Tuple[float, float]] = None,
    floor: Optional[float] = None,
) -> DecayFit:
    window = window or (0.0, trajectory.t_end)
    floor = _noise_floor(trajectory) if floor is None else floor
    return fit_log_slope(trajectory.times, trajectory.velocity_diameters, window, floor)


def decay_profile(
    trajectory: Trajectory, t_from: float = 0.0, prominence_relative: float = 1e-3
) -> DecayProfile:
    """Monotonicity, prominent local maxima of d_V and, for two agents, sign changes."""
    selected = trajectory.times >= t_from - 1e-9 * trajectory.dt
    dv = trajectory.velocity_diameters[selected]
    scale = float(dv.max()) if dv.size else 0.0
    monotone = bool(np.all(np.diff(dv) <= FLOOR_RELATIVE * scale))
    reference = trajectory.velocity_diameter_at(max(t_from, 0.0))
    peaks, _ = signal.find_peaks(dv, prominence=prominence_relative * reference)

    sign_changes = None
    if trajectory.n_agents == 2:
        w = trajectory.velocities[selected, 0, :] - trajectory.velocities[selected, 1, :]
        nonzero = np.flatnonzero(np.linalg.norm(w, axis=1) > 0)
        if nonzero.size:
            direction = w[nonzero[0]]
            projected = w @ direction
            signs = np.sign(projected[projected != 0])
            sign_changes = int(np.count_nonzero(signs[1:] != signs[:-1]))
        else:
            sign_changes = 0

    return DecayProfile(monotone=monotone, local_maxima=int(peaks.size), sign_changes=sign_changes)


def classify_behavior(
    trajectory: Trajectory,
    eps_flock: Optional[float] = None,
    t_tail: Optional[float] = None,
    eps_flock_relative: float = 1e-6,
    prominence_relative: float = 1e-3,
) -> BehaviorClass:
    """Flocking, sustained oscillation or neither, judged on [0, t_max]."""
    t_max = trajectory.t_end
    t_tail = 0.5 * t_max if t_tail is None else t_tail
    if not 0 <= t_tail < t_max:
        raise DomainError(f"t_tail={t_tail} must lie in [0, {t_max})")

    dv0 = trajectory.velocity_diameter_at(0.0)
    final = float(trajectory.velocity_diameters[-1])
    eps = eps_flock if eps_flock is not None else eps_flock_relative * dv0
    floor = _noise_floor(trajectory)

    if dv0 <= floor:
        return BehaviorClass(kind="flocking", rate=None, final_velocity_diameter=final, eps_flock=eps)

    rate = fit_decay_rate(trajectory, floor=floor).rate
    tail = fit_decay_rate(trajectory, (t_tail, t_max), floor=floor)
    # positive tail decay keeps d_X bounded; a tail at the floor already has
    bounded_spread = tail.rate is None or tail.rate > 0
    if final < eps and bounded_spread:
        return BehaviorClass(kind="flocking", rate=rate, final_velocity_diameter=final, eps_flock=eps)

    late = trajectory.times >= t_tail
    peaks, _ = signal.find_peaks(
        trajectory.velocity_diameters[late], prominence=prominence_relative * dv0
    )
    heights = trajectory.velocity_diameters[late][peaks]
    if peaks.size >= 3 and np.all(np.diff(heights) >= 0):
        return BehaviorClass(kind="oscillatory", rate=rate, final_velocity_diameter=final, eps_flock=eps)
    return BehaviorClass(kind="non_flocking", rate=rate, final_velocity_diameter=final, eps_flock=eps)


#################################################
#### CONVEX HULL CONTRACTION ####
#################################################


def verify_hull_contraction(
    vectors: ArrayLike, weights_a: ArrayLike, weights_b: ArrayLike, kappa: float
) -> bool:
    """|sum a_i v_i - sum b_i v_i| <= (1 - kappa N) max_ij |v_i - v_j|."""
    points = as_agent_array(vectors)
    n = points.shape[0]
    a = np.asarray(weights_a, dtype=np.float64).ravel()
    b = np.asarray(weights_b, dtype=np.float64).ravel()
    if a.size != n or b.size != n:
        raise DomainError(f"weights must have {n} entries")
    if not 0 < kappa <= 1.0 / n + HULL_TOL:
        raise DomainError(f"kappa must lie in (0, 1/{n}], got {kappa}")
    for w in (a, b):
        if abs(w.sum() - 1.0) > HULL_TOL or np.any(w < kappa - HULL_TOL):
            raise DomainError(f"weights {w} are not stochastic with entries >= {kappa}")

    gap = float(np.linalg.norm(a @ points - b @ points))
    return gap <= max(0.0, 1.0 - kappa * n) * _diameter(points) + HULL_TOL
