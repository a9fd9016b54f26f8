from dynamics.diagnostics import characteristic_roots, check_flocking_condition
from models.reports import FlockingCertificate, RootSearchResult
from settings.logger import logger

from ..scenarios.controllers import apply_overrides, get_builtin, load_scenario
from .schema import CertifyRequest, RootsRequest

###############################################
##### FLOCKING CERTIFICATE CONTROLLER #####
###############################################


def certify(request: CertifyRequest) -> FlockingCertificate:
    config = (
        load_scenario(request.config)
        if request.config
        else get_builtin(request.scenario or "fig2_tau1")
    )
    config = apply_overrides(config, tau=request.tau, dt=request.dt)
    psi = config.psi.build()
    history = config.history.build(config.tau)
    certificate = check_flocking_condition(
        history, psi, config.integrator.aligned_to(config.tau).dt
    )
    logger.info(
        f"[DELAYFLOCK] Certificate for {config.name}: satisfied={certificate.satisfied}"
    )
    return certificate


###############################################
##### CHARACTERISTIC ROOTS CONTROLLER #####
###############################################


def roots(request: RootsRequest) -> RootSearchResult:
    result = characteristic_roots(request.tau, request.count)
    if result.small_delay_condition:
        logger.info(
            f"[DELAYFLOCK] tau={request.tau} < 1/sqrt(2): two-agent difference decays"
        )
    return result
