import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from dynamics.dde_integrator import Trajectory, integrate
from dynamics.diagnostics import (check_flocking_condition, classify_behavior,
                                  decay_profile, dissipative_inequality_excess,
                                  fit_decay_rate, lyapunov_series,
                                  velocity_bound_excess)
from helper.custom_errors import ConfigurationError, GenericError
from helper.exporters import write_json, write_table, write_trajectory
from models.reports import (BehaviorClass, DecayFit, DecayProfile,
                            FlockingCertificate, InequalityCheck, SweepRow)
from settings.config import CONFIG
from settings.logger import logger

from .library import BUILTIN_SCENARIOS
from .schema import RunSummary, ScenarioConfig

SweepParameter = Literal["tau", "dt", "beta"]


def validation_fields(error: ValidationError) -> List[str]:
    return [".".join(str(part) for part in e["loc"]) for e in error.errors()]


###############################################
##### SCENARIO LOADING #####
###############################################


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} does not exist", fields=["config"])
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"config file {path} is not valid JSON: {e}")
    return parse_scenario(raw)


def parse_scenario(raw: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as e:
        fields = validation_fields(e)
        logger.error(f"[DELAYFLOCK] Invalid scenario config, fields: {fields}")
        raise ConfigurationError(f"invalid scenario config: {fields}", fields=fields)


def get_builtin(name: str) -> ScenarioConfig:
    if name not in BUILTIN_SCENARIOS:
        raise ConfigurationError(
            f"unknown scenario '{name}', choose from {sorted(BUILTIN_SCENARIOS)}",
            fields=["scenario"],
        )
    return BUILTIN_SCENARIOS[name]


def apply_overrides(
    config: ScenarioConfig,
    tau: Optional[float] = None,
    dt: Optional[float] = None,
    scheme: Optional[str] = None,
    t_max: Optional[float] = None,
    beta: Optional[float] = None,
    name: Optional[str] = None,
) -> ScenarioConfig:
    """Re-validated copy with the given fields replaced."""
    data = config.model_dump()
    if tau is not None:
        data["tau"] = tau
        # keep the step a fixed fraction of the delay unless dt is given too
        data["integrator"]["dt"] = None
    if dt is not None:
        data["integrator"]["dt"] = dt
    if scheme is not None:
        data["integrator"]["scheme"] = scheme
    if t_max is not None:
        data["integrator"]["t_max"] = t_max
    if beta is not None:
        if data["psi"]["family"] != "cucker_smale":
            raise ConfigurationError(
                f"beta only applies to cucker_smale, not {data['psi']['family']}",
                fields=["psi.beta"],
            )
        data["psi"]["beta"] = beta
    if name is not None:
        data["name"] = name
    return parse_scenario(data)


###############################################
##### SCENARIO RUNS #####
###############################################


@dataclass
class ScenarioBundle:
    config: ScenarioConfig
    trajectory: Trajectory
    certificate: FlockingCertificate
    classification: BehaviorClass
    profile: DecayProfile
    decay_fit: DecayFit
    inequality: InequalityCheck
    summary: RunSummary
    files: Dict[str, Path] = field(default_factory=dict)


def run_scenario(
    config: ScenarioConfig, out_dir: Optional[str | Path] = None, write: bool = True
) -> ScenarioBundle:
    """Integrate, diagnose and (optionally) export one scenario."""
    logger.info(f"[DELAYFLOCK] Running scenario {config.name}")
    psi = config.psi.build()
    history = config.history.build(config.tau)
    trajectory = integrate(history, psi, config.integrator)

    certificate = check_flocking_condition(history, psi, trajectory.dt)
    thresholds = config.thresholds
    classification = classify_behavior(
        trajectory,
        eps_flock=thresholds.eps_flock,
        t_tail=thresholds.t_tail,
        eps_flock_relative=thresholds.eps_flock_relative,
        prominence_relative=thresholds.prominence_relative,
    )
    profile = decay_profile(trajectory, prominence_relative=thresholds.prominence_relative)
    fit = fit_decay_rate(trajectory)
    inequality = dissipative_inequality_excess(trajectory)

    _, functional = lyapunov_series(trajectory)
    increase = float(np.max(np.diff(functional))) if functional.size > 1 else None

    summary = RunSummary(
        name=config.name,
        n_agents=trajectory.n_agents,
        dim=trajectory.dim,
        tau=trajectory.tau,
        dt=trajectory.dt,
        scheme=trajectory.config.scheme,
        normalization=trajectory.config.normalization,
        R_v=trajectory.initial_speed_bound,
        initial_velocity_diameter=trajectory.velocity_diameter_at(0.0),
        final_velocity_diameter=float(trajectory.velocity_diameters[-1]),
        max_spatial_diameter=float(trajectory.spatial_diameters.max()),
        velocity_bound_excess=velocity_bound_excess(trajectory),
        lyapunov_max_increase=increase,
        classification=classification.model_dump(mode="json"),
        profile=profile.model_dump(mode="json"),
        decay_fit=fit.model_dump(mode="json"),
        inequality_check=inequality.model_dump(mode="json"),
    )
    bundle = ScenarioBundle(
        config=config,
        trajectory=trajectory,
        certificate=certificate,
        classification=classification,
        profile=profile,
        decay_fit=fit,
        inequality=inequality,
        summary=summary,
    )
    logger.info(
        f"[DELAYFLOCK] {config.name}: {classification.kind}, "
        f"d_V(t_max)={classification.final_velocity_diameter:.3e}"
    )

    if write:
        root = Path(out_dir or config.output_dir or CONFIG.WORK_DIR) / config.name
        bundle.files.update(
            write_trajectory(trajectory, root, extra={"scenario": config.model_dump(mode="json")})
        )
        bundle.files["diagnostics"] = write_json(
            summary.model_dump(mode="json"), root / "diagnostics.json"
        )
        bundle.files["certificate"] = write_json(
            certificate.model_dump(mode="json"), root / "certificate.json"
        )
    return bundle


###############################################
##### PARAMETER SWEEPS #####
###############################################


def _sweep_one(job: tuple) -> SweepRow:
    config, parameter, value = job
    try:
        bundle = run_scenario(config, write=False)
    except GenericError as e:
        logger.warning(f"[DELAYFLOCK] Sweep {parameter}={value} failed: {e}")
        return SweepRow(parameter=parameter, value=value, error=str(e))
    return SweepRow(
        parameter=parameter,
        value=value,
        kind=bundle.classification.kind,
        rate=bundle.classification.rate,
        monotone=bundle.profile.monotone,
        local_maxima=bundle.profile.local_maxima,
        sign_changes=bundle.profile.sign_changes,
        certificate_satisfied=bundle.certificate.satisfied,
    )


def sweep(
    base: ScenarioConfig,
    parameter: SweepParameter,
    values: Sequence[float],
    workers: Optional[int] = None,
) -> List[SweepRow]:
    """One row per value; a failing value is recorded and the sweep goes on."""
    if not values:
        raise ConfigurationError("sweep needs at least one value", fields=["values"])
    workers = workers or CONFIG.SWEEP_WORKERS

    jobs, rows = [], {}
    for position, value in enumerate(values):
        try:
            config = apply_overrides(
                base, name=f"{base.name}_{parameter}{value:g}", **{parameter: value}
            )
        except GenericError as e:
            logger.warning(f"[DELAYFLOCK] Sweep {parameter}={value} rejected: {e}")
            rows[position] = SweepRow(parameter=parameter, value=value, error=str(e))
            continue
        jobs.append((position, (config, parameter, value)))

    logger.info(
        f"[DELAYFLOCK] Sweeping {parameter} over {list(values)} with {workers} worker(s)"
    )
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, [job for _, job in jobs]))
    else:
        results = [_sweep_one(job) for _, job in jobs]
    for (position, _), row in zip(jobs, results):
        rows[position] = row
    return [rows[position] for position in range(len(values))]


def write_sweep(rows: List[SweepRow], base: ScenarioConfig, parameter: str, out_dir: str | Path) -> dict:
    path = Path(out_dir) / f"{base.name}_sweep_{parameter}.csv"
    frame = pd.DataFrame([row.model_dump() for row in rows])
    return write_table(
        frame, path, {"base": base.model_dump(mode="json"), "parameter": parameter}
    )
