"""
verify subcommand

Runs the requested checks for a family and writes the report, plus a CSV
trajectory sidecar when a geodesic check ran and an output path is set.
"""

import argparse
import asyncio
import logging

from app.routes.common import add_run_arguments, config_from_args, emit
from app.services.geodesic_service import export_csv
from app.services.verification_service import serialize_report, trajectory_sidecar_path, verification_service

logger = logging.getLogger(__name__)


def handle(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    report = asyncio.run(verification_service.run(config))
    emit(serialize_report(report, config.output.format), config.output.path)

    trajectory = verification_service.last_trajectory
    if config.output.path and "geodesic" in config.checks and trajectory is not None:
        export_csv(trajectory, trajectory_sidecar_path(config.output.path))

    if report.exit_code:
        failed = [c.name for c in report.checks if c.status == "fail"]
        logger.error(f"❌ Failed checks: {failed}")
    return report.exit_code


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify", help="run verification checks on a catalog family")
    add_run_arguments(parser)
    parser.set_defaults(handler=handle)
