import argparse

from .controllers import converge, stability
from .schema import ConvergeRequest, StabilityRequest


def add_kinetic_arguments(parser: argparse.ArgumentParser, t_max: float) -> None:
    parser.add_argument("--tau", type=float, default=0.25)
    parser.add_argument("--t-max", type=float, default=t_max, dest="t_max")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--scheme", choices=["euler", "rk4"], default="euler")
    parser.add_argument("--record-stride", type=int, default=10, dest="record_stride")
    parser.add_argument(
        "--normalization", choices=["exclude_self", "include_all"], default="include_all"
    )
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default=None)


def _common(args: argparse.Namespace) -> dict:
    return dict(
        tau=args.tau,
        t_max=args.t_max,
        seed=args.seed,
        dt=args.dt,
        scheme=args.scheme,
        record_stride=args.record_stride,
        normalization=args.normalization,
        workers=args.workers,
    )


def converge_command(args: argparse.Namespace):
    request = ConvergeRequest(n_list=args.n_list, **_common(args))
    study = converge(request, out_dir=args.out)
    return {
        "seed": study.seed,
        "reference_size": study.reference_size,
        "summary": [row.model_dump(mode="json") for row in study.summary],
    }


def stability_command(args: argparse.Namespace):
    request = StabilityRequest(
        n_agents=args.n, epsilon=args.epsilon, target=args.target, **_common(args)
    )
    report = stability(request, out_dir=args.out)
    return report.model_dump(mode="json", exclude={"times", "ratios"}) | {
        "max_ratio": max(report.ratios) if report.ratios else None
    }


def include_router(subparsers) -> None:
    converger = subparsers.add_parser("converge", help="particle-to-kinetic convergence study")
    converger.add_argument("--n-list", type=int, nargs="+", default=[16, 32, 64, 128], dest="n_list")
    add_kinetic_arguments(converger, t_max=5.0)
    converger.set_defaults(handler=converge_command)

    stabilizer = subparsers.add_parser("stability", help="Wasserstein stability of perturbed data")
    stabilizer.add_argument("--n", type=int, default=16)
    stabilizer.add_argument("--epsilon", type=float, default=1e-3)
    stabilizer.add_argument("--target", choices=["velocity", "position"], default="velocity")
    add_kinetic_arguments(stabilizer, t_max=10.0)
    stabilizer.set_defaults(handler=stability_command)
