import argparse

from .analysis.router import include_router as include_analysis
from .meanfield.router import include_router as include_meanfield
from .scenarios.router import include_router as include_scenarios


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delayflock",
        description="Delayed Cucker-Smale flocking: simulation, certificates and mean-field studies.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    include_scenarios(subparsers)
    include_analysis(subparsers)
    include_meanfield(subparsers)
    return parser
