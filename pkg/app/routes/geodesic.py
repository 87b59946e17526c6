"""
geodesic subcommand

Integrates one geodesic of a catalog family and writes either the
trajectory CSV or a JSON conservation summary.
"""

import argparse
import json
import logging
from typing import List, Optional

import numpy as np

from app.config.settings import TOOL_VERSION, settings
from app.routes.common import add_output_arguments, emit, parse_pairs
from app.services.catalog_service import build_metric
from app.services.frames_service import TIME_INDEX
from app.services.geodesic_service import IntegratorConfig, PhaseState, export_csv, integrate
from app.services.verification_service import initial_phase_state

logger = logging.getLogger(__name__)


def _vector(text: Optional[str], flag: str) -> Optional[List[float]]:
    if text is None:
        return None
    values = [float(part) for part in text.split(",")]
    if len(values) != 4:
        raise ValueError(f"{flag} needs four comma-separated numbers, got {text!r}")
    return values


def handle(args: argparse.Namespace) -> int:
    metric = build_metric(args.family, parse_pairs(args.param, "--param"))
    seed = settings.seed if args.seed is None else args.seed

    x = _vector(args.x, "--x")
    if x is None:
        lower, upper = metric.sample_window
        x = [0.0, 0.0, 0.0, 0.5 * (lower + upper)]
    x = np.array(x)
    p = _vector(args.p, "--p")
    state = initial_phase_state(metric, x, seed) if p is None else PhaseState(x, p)

    cfg = IntegratorConfig(rtol=args.rtol or settings.rtol, atol=args.atol or settings.atol)
    trajectory = integrate(metric, state, (0.0, args.span), cfg)
    tolerance = settings.tolerance_for("geodesic")
    drift = trajectory.report.worst_relative_drift()

    if args.format == "csv":
        if args.out:
            export_csv(trajectory, args.out)
        else:
            raise ValueError("--format csv needs --out for the trajectory file")
    else:
        summary = {
            "family": metric.name,
            "params": dict(sorted(metric.params.items())),
            "seed": seed,
            "tool_version": TOOL_VERSION,
            "initial": {"x": state.x.tolist(), "p": state.p.tolist()},
            "span": args.span,
            "truncated": trajectory.truncated,
            "exit_parameter": trajectory.exit_parameter,
            "turning_parameters": trajectory.turning_parameters,
            "final_tau": float(trajectory.states[TIME_INDEX, -1]),
            "quantities": trajectory.report.to_dict(),
            "worst_relative_drift": drift,
            "tolerance": tolerance,
        }
        emit(json.dumps(summary, sort_keys=True, indent=2) + "\n", args.out)
    return 0 if drift <= tolerance else 2


def register(subparsers) -> None:
    parser = subparsers.add_parser("geodesic", help="integrate a geodesic and report conserved-quantity drift")
    parser.add_argument("--family", required=True, help="catalog family name")
    parser.add_argument("--param", action="append", metavar="K=V", help="family parameter (repeatable)")
    parser.add_argument("--x", help="initial point x,y,z,tau")
    parser.add_argument("--p", help="initial momenta p_x,p_y,p_z,p_tau (seeded random when omitted)")
    parser.add_argument("--span", type=float, default=10.0, help="affine parameter span")
    parser.add_argument("--seed", type=int, help="seed for random initial momenta")
    parser.add_argument("--rtol", type=float, help="relative tolerance")
    parser.add_argument("--atol", type=float, help="absolute tolerance")
    add_output_arguments(parser)
    parser.set_defaults(handler=handle)
