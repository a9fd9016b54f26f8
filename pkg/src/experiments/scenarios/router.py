import argparse

from settings.config import CONFIG

from .controllers import (apply_overrides, get_builtin, load_scenario,
                          run_scenario, sweep, write_sweep)
from .library import BUILTIN_SCENARIOS


def add_scenario_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", help="scenario JSON file")
    source.add_argument("--scenario", default=None, help="builtin scenario name")
    parser.add_argument("--tau", type=float, default=None)
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--scheme", choices=["euler", "rk4"], default=None)
    parser.add_argument("--t-max", type=float, default=None, dest="t_max")


def resolve_scenario(args: argparse.Namespace):
    config = load_scenario(args.config) if args.config else get_builtin(args.scenario or "fig1_tau025")
    return apply_overrides(
        config, tau=args.tau, dt=args.dt, scheme=args.scheme, t_max=args.t_max
    )


#############################################
#############################################
### Simulate Command ###
#############################################
#############################################


def simulate_command(args: argparse.Namespace):
    bundle = run_scenario(resolve_scenario(args), out_dir=args.out)
    payload = bundle.summary.model_dump(mode="json")
    payload["certificate"] = bundle.certificate.model_dump(mode="json")
    payload["files"] = {key: str(path) for key, path in bundle.files.items()}
    return payload


#############################################
#############################################
### Sweep Command ###
#############################################
#############################################


def sweep_command(args: argparse.Namespace):
    base = resolve_scenario(args)
    rows = sweep(base, args.param, args.values, workers=args.workers)
    if args.out:
        write_sweep(rows, base, args.param, args.out)
    return [row.model_dump(mode="json") for row in rows]


#############################################
#############################################
### Scenario Library Commands ###
#############################################
#############################################


def list_command(args: argparse.Namespace):
    return sorted(BUILTIN_SCENARIOS)


def show_command(args: argparse.Namespace):
    return get_builtin(args.name).model_dump(mode="json")


def include_router(subparsers) -> None:
    simulate = subparsers.add_parser("simulate", help="integrate a scenario and export its bundle")
    add_scenario_arguments(simulate)
    simulate.add_argument("--out", default=CONFIG.WORK_DIR)
    simulate.set_defaults(handler=simulate_command)

    sweeper = subparsers.add_parser("sweep", help="classify a scenario across parameter values")
    add_scenario_arguments(sweeper)
    sweeper.add_argument("--param", choices=["tau", "dt", "beta"], required=True)
    sweeper.add_argument("--values", type=float, nargs="+", required=True)
    sweeper.add_argument("--workers", type=int, default=CONFIG.SWEEP_WORKERS)
    sweeper.add_argument("--out", default=None)
    sweeper.set_defaults(handler=sweep_command)

    library = subparsers.add_parser("scenarios", help="builtin scenario library")
    library_commands = library.add_subparsers(dest="library_command", required=True)
    library_commands.add_parser("list").set_defaults(handler=list_command)
    show = library_commands.add_parser("show")
    show.add_argument("name")
    show.set_defaults(handler=show_command)
