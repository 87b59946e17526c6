"""
elliptic-selftest subcommand

Identity checks of the elliptic layer for the quartic of the elliptic
type V metric.
"""

import argparse

from app.config.settings import TOOL_VERSION, settings
from app.models.response import CheckResult, Report
from app.routes.common import add_output_arguments, emit, parse_pairs
from app.services import elliptic_service as ellipticfn
from app.services.catalog_service import build_metric
from app.services.verification_service import serialize_report


def handle(args: argparse.Namespace) -> int:
    params = parse_pairs(args.param, "--param")
    if "theta" not in params and "lambda" not in params:
        raise ValueError("elliptic-selftest needs --param theta=V or --param lambda=V")
    metric = build_metric("bianchi5_minkowski", params)
    cov = metric.change_of_variable
    residuals = ellipticfn.selftest(cov)
    tolerance = settings.tolerance_for("elliptic-selftest")
    worst = max(residuals.values())
    check = CheckResult(
        name="elliptic-selftest",
        status="pass" if worst <= tolerance else "fail",
        worst_residual=worst,
        tolerance=tolerance,
        detail={**residuals, "k2": cov.ctx.k2, "v0": cov.v0, "xi": cov.xi},
    )
    report = Report(
        family=metric.name,
        params=dict(sorted(metric.params.items())),
        seed=settings.seed,
        tool_version=TOOL_VERSION,
        checks=[check],
    )
    emit(serialize_report(report, args.format), args.out)
    return report.exit_code


def register(subparsers) -> None:
    parser = subparsers.add_parser("elliptic-selftest", help="check the elliptic-function identities")
    parser.add_argument("--param", action="append", metavar="K=V", help="theta or lambda, and c (repeatable)")
    add_output_arguments(parser)
    parser.set_defaults(handler=handle)
