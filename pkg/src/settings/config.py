import os

from dotenv import load_dotenv

load_dotenv()


class CONFIG:
    WORK_DIR: str = os.getenv("WORK_DIR", "./runs")
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "info")
    LOG_TIMEZONE: str = os.getenv("LOG_TIMEZONE", "UTC")

    # QUADRATURE (tail integrals of the influence function)
    QUAD_ABS_TOL: float = float(os.getenv("QUAD_ABS_TOL", 1e-10))
    QUAD_TRUNCATION_RADIUS: float = float(os.getenv("QUAD_TRUNCATION_RADIUS", 1e3))
    QUAD_MAX_SUBINTERVALS: int = int(os.getenv("QUAD_MAX_SUBINTERVALS", 200))

    # INTEGRATOR
    # default step is tau / DELAY_DIVISIONS
    DELAY_DIVISIONS: int = int(os.getenv("DELAY_DIVISIONS", 100))

    # EXPERIMENTS
    SWEEP_WORKERS: int = int(os.getenv("SWEEP_WORKERS", 1))
    MAX_REPLICATED_ATOMS: int = int(os.getenv("MAX_REPLICATED_ATOMS", 4096))

    # EXPORT
    CSV_FLOAT_FORMAT: str = os.getenv("CSV_FLOAT_FORMAT", "%.17g")
