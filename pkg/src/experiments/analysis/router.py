import argparse

from .controllers import certify, roots
from .schema import CertifyRequest, RootsRequest


def certify_command(args: argparse.Namespace):
    request = CertifyRequest(scenario=args.scenario, config=args.config, tau=args.tau, dt=args.dt)
    return certify(request).model_dump(mode="json")


def roots_command(args: argparse.Namespace):
    return roots(RootsRequest(tau=args.tau, count=args.count)).model_dump(mode="json")


def include_router(subparsers) -> None:
    certifier = subparsers.add_parser("certify", help="evaluate the flocking certificate")
    source = certifier.add_mutually_exclusive_group()
    source.add_argument("--config")
    source.add_argument("--scenario")
    certifier.add_argument("--tau", type=float, default=None)
    certifier.add_argument("--dt", type=float, default=None)
    certifier.set_defaults(handler=certify_command)

    root_finder = subparsers.add_parser("roots", help="roots of lambda + 1 + exp(-lambda tau)")
    root_finder.add_argument("--tau", type=float, required=True)
    root_finder.add_argument("--count", type=int, default=5)
    root_finder.set_defaults(handler=roots_command)
