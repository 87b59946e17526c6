"""
classify subcommand

Petrov-like classification of a family over the sample grid.
"""

import argparse
import asyncio

from app.routes.common import add_run_arguments, config_from_args, emit
from app.services.verification_service import serialize_report, verification_service


def handle(args: argparse.Namespace) -> int:
    config = config_from_args(args, checks=["petrov"])
    report = asyncio.run(verification_service.run(config))
    emit(serialize_report(report, config.output.format), config.output.path)
    return report.exit_code


def register(subparsers) -> None:
    parser = subparsers.add_parser("classify", help="classify the Weyl curvature of a catalog family")
    add_run_arguments(parser, with_checks=False)
    parser.set_defaults(handler=handle)
