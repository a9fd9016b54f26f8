import json
from pathlib import Path
from typing import Any, Optional

import pandas as pd

from dynamics.dde_integrator import Trajectory
from models.base import json_safe
from settings.config import CONFIG
from settings.logger import logger

#################################################
#### FRAMES ####
#################################################


def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    """t, x_1_1 .. x_N_d, v_1_1 .. v_N_d with 1-based agent and axis indices."""
    n, d = trajectory.n_agents, trajectory.dim
    labels = [f"{i}_{k}" for i in range(1, n + 1) for k in range(1, d + 1)]
    columns = {"t": trajectory.times}
    flat_x = trajectory.positions.reshape(len(trajectory.times), n * d)
    flat_v = trajectory.velocities.reshape(len(trajectory.times), n * d)
    for j, label in enumerate(labels):
        columns[f"x_{label}"] = flat_x[:, j]
    for j, label in enumerate(labels):
        columns[f"v_{label}"] = flat_v[:, j]
    return pd.DataFrame(columns)


def diameters_frame(trajectory: Trajectory) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": trajectory.times,
            "d_X": trajectory.spatial_diameters,
            "d_V": trajectory.velocity_diameters,
        }
    )


#################################################
#### WRITERS ####
#################################################


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        path,
        index=False,
        lineterminator="\n",
        float_format=CONFIG.CSV_FLOAT_FORMAT,
    )
    logger.info(f"[DELAYFLOCK] Wrote {path}")
    return path


def dumps(payload: Any) -> str:
    return json.dumps(
        json_safe(payload), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False
    )


def write_json(payload: Any, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload) + "\n", encoding="utf-8")
    logger.info(f"[DELAYFLOCK] Wrote {path}")
    return path


def write_trajectory(
    trajectory: Trajectory, directory: Path, extra: Optional[dict] = None
) -> dict:
    """trajectory.csv, its JSON sidecar and diameters.csv under directory."""
    directory = Path(directory)
    sidecar = trajectory.metadata()
    sidecar["columns"] = "t, x_i_k..., v_i_k... (agent i, axis k, 1-based)"
    if extra:
        sidecar.update(extra)
    return {
        "trajectory": write_csv(trajectory_frame(trajectory), directory / "trajectory.csv"),
        "trajectory_sidecar": write_json(sidecar, directory / "trajectory.json"),
        "diameters": write_csv(diameters_frame(trajectory), directory / "diameters.csv"),
    }


def write_table(frame: pd.DataFrame, path: Path, sidecar: dict) -> dict:
    """A CSV table plus `<stem>.json` next to it."""
    path = Path(path)
    return {
        "table": write_csv(frame, path),
        "sidecar": write_json(sidecar, path.with_suffix(".json")),
    }
