"""Admissible influence functions and the integrals built from them.

An influence function is bounded, positive, nonincreasing and Lipschitz on
[0, inf) with psi(0) = 1. Evaluation never returns a value below the smallest
positive normal double, so normalized weights never divide by zero.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, special

from helper.custom_errors import (ConfigurationError, ConvergenceError,
                                  DomainError)
from models.reports import InfluenceReport, InfluenceViolation, TailIntegral
from settings.config import CONFIG
from settings.logger import logger

TINY = np.finfo(np.float64).tiny
NORMALIZATION_TOL = 1e-12
LIPSCHITZ_SLACK = 1e-14


class InfluenceFamily(str, Enum):
    EXPONENTIAL = "exponential"
    CUCKER_SMALE = "cucker_smale"
    CONSTANT = "constant"
    TABULATED = "tabulated"


class QuadratureConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(default_factory=lambda: CONFIG.QUAD_ABS_TOL, gt=0)
    truncation_radius: float = Field(
        default_factory=lambda: CONFIG.QUAD_TRUNCATION_RADIUS, gt=0
    )
    max_subintervals: int = Field(
        default_factory=lambda: CONFIG.QUAD_MAX_SUBINTERVALS, ge=1
    )


#################################################
#### INFLUENCE FUNCTION ####
#################################################


@dataclass(frozen=True)
class InfluenceFunction:
    family: InfluenceFamily
    beta: Optional[float] = None
    grid: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        match self.family:
            case InfluenceFamily.CUCKER_SMALE:
                if self.beta is None or not (self.beta > 0) or math.isinf(self.beta):
                    raise ConfigurationError(
                        f"cucker_smale needs a finite beta > 0, got {self.beta}",
                        fields=["psi.beta"],
                    )
            case InfluenceFamily.TABULATED:
                grid = np.asarray(self.grid, dtype=np.float64)
                values = np.asarray(self.values, dtype=np.float64)
                if grid.ndim != 1 or grid.size == 0 or grid.shape != values.shape:
                    raise ConfigurationError(
                        "tabulated influence needs equally long, nonempty grid and values",
                        fields=["psi.grid", "psi.values"],
                    )
                if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(values))):
                    raise ConfigurationError(
                        "tabulated influence must be finite", fields=["psi.values"]
                    )
                if grid[0] < 0 or np.any(np.diff(grid) <= 0):
                    raise ConfigurationError(
                        "tabulated grid must be nonnegative and strictly increasing",
                        fields=["psi.grid"],
                    )

    @classmethod
    def exponential(cls) -> "InfluenceFunction":
        return cls(InfluenceFamily.EXPONENTIAL)

    @classmethod
    def cucker_smale(cls, beta: float) -> "InfluenceFunction":
        return cls(InfluenceFamily.CUCKER_SMALE, beta=float(beta))

    @classmethod
    def constant(cls) -> "InfluenceFunction":
        return cls(InfluenceFamily.CONSTANT)

    @classmethod
    def tabulated(cls, grid: ArrayLike, values: ArrayLike) -> "InfluenceFunction":
        return cls(
            InfluenceFamily.TABULATED,
            grid=tuple(float(g) for g in np.ravel(grid)),
            values=tuple(float(v) for v in np.ravel(values)),
        )

    @classmethod
    def from_spec(cls, spec: dict) -> "InfluenceFunction":
        family = InfluenceFamily(spec["family"])
        match family:
            case InfluenceFamily.EXPONENTIAL:
                return cls.exponential()
            case InfluenceFamily.CUCKER_SMALE:
                return cls.cucker_smale(spec["beta"])
            case InfluenceFamily.CONSTANT:
                return cls.constant()
            case InfluenceFamily.TABULATED:
                return cls.tabulated(spec["grid"], spec["values"])

    def to_spec(self) -> dict:
        spec = {"family": self.family.value}
        if self.family is InfluenceFamily.CUCKER_SMALE:
            spec["beta"] = self.beta
        if self.family is InfluenceFamily.TABULATED:
            spec["grid"] = list(self.grid)
            spec["values"] = list(self.values)
        return spec

    @cached_property
    def _grid(self) -> NDArray[np.float64]:
        return np.asarray(self.grid, dtype=np.float64)

    @cached_property
    def _values(self) -> NDArray[np.float64]:
        return np.asarray(self.values, dtype=np.float64)

    @cached_property
    def lipschitz_bound(self) -> float:
        match self.family:
            case InfluenceFamily.EXPONENTIAL:
                return 1.0
            case InfluenceFamily.CONSTANT:
                return 0.0
            case InfluenceFamily.CUCKER_SMALE:
                # |d/ds (1+s^2)^-b| peaks at s = (2b+1)^-1/2
                s = 1.0 / math.sqrt(2.0 * self.beta + 1.0)
                return 2.0 * self.beta * s * (1.0 + s * s) ** (-self.beta - 1.0)
            case InfluenceFamily.TABULATED:
                if self._grid.size < 2:
                    return 0.0
                return float(np.max(np.abs(np.diff(self._values) / np.diff(self._grid))))

    @cached_property
    def sup_bound(self) -> float:
        if self.family is InfluenceFamily.TABULATED:
            return float(np.max(self._values))
        return 1.0

    @property
    def heavy_tailed(self) -> bool:
        """True when the tail integral diverges."""
        match self.family:
            case InfluenceFamily.CUCKER_SMALE:
                return self.beta <= 0.5
            case InfluenceFamily.CONSTANT | InfluenceFamily.TABULATED:
                return True
            case _:
                return False

    def raw(self, s: NDArray[np.float64]) -> NDArray[np.float64]:
        """Unclamped evaluation on s >= 0."""
        match self.family:
            case InfluenceFamily.EXPONENTIAL:
                return np.exp(-s)
            case InfluenceFamily.CUCKER_SMALE:
                with np.errstate(over="ignore"):
                    return np.exp(-self.beta * np.log1p(s * s))
            case InfluenceFamily.CONSTANT:
                return np.ones_like(s)
            case InfluenceFamily.TABULATED:
                return np.interp(s, self._grid, self._values)

    def __call__(self, s: ArrayLike):
        return eval_psi(self, s)


def eval_psi(f: InfluenceFunction, s: ArrayLike):
    """psi(s), clamped below at the smallest positive normal double."""
    arr = np.asarray(s, dtype=np.float64)
    if not np.all(arr >= 0):
        raise DomainError(f"influence function evaluated at negative or NaN distance: {s}")
    out = np.maximum(f.raw(arr), TINY)
    if out.ndim == 0:
        return float(out)
    return out


#################################################
#### TAIL AND DEFINITE INTEGRALS ####
#################################################


def _cucker_smale_tail(beta: float, a: float) -> float:
    # substitution u = 1/(1+s^2) turns the tail into an incomplete beta integral
    return float(
        0.5
        * special.beta(beta - 0.5, 0.5)
        * special.betainc(beta - 0.5, 0.5, 1.0 / (1.0 + a * a))
    )


def tail_integral(
    f: InfluenceFunction, a: float, cfg: Optional[QuadratureConfig] = None
) -> TailIntegral:
    """int_a^inf psi(s) ds, analytic wherever a closed form exists."""
    if not a >= 0:
        raise DomainError(f"tail integral lower limit must be >= 0, got {a}")
    if f.heavy_tailed:
        return TailIntegral(value=math.inf, method="analytic")
    match f.family:
        case InfluenceFamily.EXPONENTIAL:
            return TailIntegral(value=math.exp(-a), method="analytic")
        case InfluenceFamily.CUCKER_SMALE:
            return TailIntegral(value=_cucker_smale_tail(f.beta, a), method="analytic")
    return quadrature_tail(f, a, cfg)


def _remainder_bound(f: InfluenceFunction, b: float) -> float:
    match f.family:
        case InfluenceFamily.EXPONENTIAL:
            return math.exp(-b)
        case InfluenceFamily.CUCKER_SMALE:
            # (1+s^2)^-beta <= s^-2beta
            return b ** (1.0 - 2.0 * f.beta) / (2.0 * f.beta - 1.0)
    return 0.0


def quadrature_tail(
    f: InfluenceFunction, a: float, cfg: Optional[QuadratureConfig] = None
) -> TailIntegral:
    """Adaptive Gauss-Kronrod on [a, a + R] plus a decay bound for the remainder."""
    cfg = cfg or QuadratureConfig()
    if not a >= 0:
        raise DomainError(f"tail integral lower limit must be >= 0, got {a}")
    if f.heavy_tailed:
        return TailIntegral(value=math.inf, method="analytic")

    upper = a + cfg.truncation_radius
    result = integrate.quad(
        lambda s: float(f.raw(np.float64(s))),
        a,
        upper,
        epsabs=cfg.abs_tol,
        epsrel=0.0,
        limit=cfg.max_subintervals,
        full_output=1,
    )
    body, abserr = result[0], result[1]
    value = body + _remainder_bound(f, upper)
    if len(result) > 3 or abserr > cfg.abs_tol:
        logger.error(
            f"[DELAYFLOCK] Tail quadrature did not converge from a={a}: error estimate {abserr}"
        )
        raise ConvergenceError(
            f"tail quadrature from a={a} did not reach abs_tol={cfg.abs_tol} "
            f"(error estimate {abserr:.3e})",
            partial_value=value,
        )
    return TailIntegral(
        value=value,
        method="adaptive_quadrature",
        abs_tol=cfg.abs_tol,
        truncation_radius=cfg.truncation_radius,
        error_estimate=abserr,
    )


def definite_integral(
    f: InfluenceFunction, a: float, b: float, cfg: Optional[QuadratureConfig] = None
) -> float:
    """Signed int_a^b psi(s) ds for a, b >= 0; finite even for heavy tails."""
    if not (a >= 0 and b >= 0):
        raise DomainError(f"integration limits must be >= 0, got ({a}, {b})")
    if b < a:
        return -definite_integral(f, b, a, cfg)
    if b == a:
        return 0.0

    match f.family:
        case InfluenceFamily.EXPONENTIAL:
            return math.exp(-a) * -math.expm1(-(b - a))
        case InfluenceFamily.CONSTANT:
            return b - a
        case InfluenceFamily.CUCKER_SMALE if f.beta > 0.5:
            return _cucker_smale_tail(f.beta, a) - _cucker_smale_tail(f.beta, b)
        case InfluenceFamily.TABULATED:
            # piecewise linear, so the trapezoid rule on the knots is exact
            inner = f._grid[(f._grid > a) & (f._grid < b)]
            knots = np.concatenate(([a], inner, [b]))
            return float(integrate.trapezoid(f.raw(knots), knots))

    cfg = cfg or QuadratureConfig()
    value, _ = integrate.quad(
        lambda s: float(f.raw(np.float64(s))),
        a,
        b,
        epsabs=cfg.abs_tol,
        epsrel=0.0,
        limit=cfg.max_subintervals,
    )
    return value


#################################################
#### VALIDATION ####
#################################################


def validate_influence(f: InfluenceFunction, grid: ArrayLike) -> InfluenceReport:
    """Check positivity, monotonicity, psi(0) = 1 and the Lipschitz bound on a grid."""
    s = np.asarray(grid, dtype=np.float64).ravel()
    violations = []

    if s.size == 0:
        return InfluenceReport(
            violations=[InfluenceViolation(kind="grid", detail="empty grid")]
        )
    if np.any(np.diff(s) < 0):
        return InfluenceReport(
            violations=[InfluenceViolation(kind="grid", detail="grid is not sorted")]
        )
    if np.any(s < 0):
        violations.append(
            InfluenceViolation(kind="grid", detail="negative grid points were skipped")
        )
        s = s[s >= 0]
    if f.family is InfluenceFamily.TABULATED:
        # the table nodes are where a tabulation can go wrong
        s = np.union1d(s, f._grid)
        for k, value in enumerate(f.values):
            if value <= 0:
                violations.append(
                    InfluenceViolation(
                        kind="positivity",
                        index=k,
                        s=f.grid[k],
                        detail=f"tabulated value {value} is not positive",
                    )
                )

    values = f.raw(s)
    for k in np.flatnonzero(values <= 0):
        violations.append(
            InfluenceViolation(
                kind="positivity",
                index=int(k),
                s=float(s[k]),
                detail=f"psi({s[k]}) = {values[k]}",
            )
        )

    for k in np.flatnonzero(np.diff(values) > 0):
        violations.append(
            InfluenceViolation(
                kind="monotonicity",
                index=int(k),
                s=float(s[k]),
                detail=f"psi increases between s={s[k]} and s={s[k + 1]}",
            )
        )

    psi0 = float(f.raw(np.float64(0.0)))
    exact = f.family is not InfluenceFamily.TABULATED
    if (exact and psi0 != 1.0) or abs(psi0 - 1.0) > NORMALIZATION_TOL:
        violations.append(
            InfluenceViolation(kind="normalization", s=0.0, detail=f"psi(0) = {psi0}")
        )

    if s.size > 1:
        bound = f.lipschitz_bound * np.diff(s) + LIPSCHITZ_SLACK
        for k in np.flatnonzero(np.abs(np.diff(values)) > bound):
            violations.append(
                InfluenceViolation(
                    kind="lipschitz",
                    index=int(k),
                    s=float(s[k]),
                    detail=f"slope exceeds lipschitz_bound={f.lipschitz_bound}",
                )
            )

    return InfluenceReport(violations=violations)
