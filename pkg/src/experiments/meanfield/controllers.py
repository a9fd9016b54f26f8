from pathlib import Path
from typing import Optional

import pandas as pd

from dynamics.meanfield import convergence_study, stability_ratio
from helper.exporters import write_table
from models.reports import ConvergenceStudy, StabilityReport
from settings.logger import logger

from .schema import ConvergeRequest, StabilityRequest

###############################################
##### CONVERGENCE STUDY CONTROLLER #####
###############################################


def converge(request: ConvergeRequest, out_dir: Optional[str | Path] = None) -> ConvergenceStudy:
    study = convergence_study(
        request.datum,
        request.n_list,
        request.t_max,
        request.seed,
        request.psi.build(),
        request.tau,
        request.integrator(),
        workers=request.workers,
    )
    if out_dir is not None:
        frame = pd.DataFrame(
            [sample.model_dump() for sample in study.samples], columns=["N", "t", "d1"]
        )
        write_table(
            frame,
            Path(out_dir) / "convergence.csv",
            {
                "request": request.model_dump(mode="json"),
                "seed": study.seed,
                "reference_size": study.reference_size,
                "summary": [row.model_dump(mode="json") for row in study.summary],
            },
        )
    return study


###############################################
##### STABILITY STUDY CONTROLLER #####
###############################################


def stability(request: StabilityRequest, out_dir: Optional[str | Path] = None) -> StabilityReport:
    history = request.datum.build(request.n_agents, request.tau, request.seed)
    report = stability_ratio(
        history,
        request.psi.build(),
        request.integrator(),
        request.epsilon,
        target=request.target,
        seed=request.seed,
        workers=request.workers,
    )
    logger.info(
        f"[DELAYFLOCK] Stability ratio for eps={request.epsilon}: log slope {report.log_slope}"
    )
    if out_dir is not None:
        frame = pd.DataFrame({"t": report.times, "ratio": report.ratios})
        write_table(
            frame,
            Path(out_dir) / "stability.csv",
            {
                "request": request.model_dump(mode="json"),
                "seed": report.seed,
                "initial_distance": report.initial_distance,
                "log_slope": report.log_slope,
                "envelope_rate": report.envelope_rate,
            },
        )
    return report
