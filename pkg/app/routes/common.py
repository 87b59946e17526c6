"""
Shared CLI Options

Flag parsing shared by the subcommands: family, parameters, grid, seed,
tolerance overrides, output path and format, and the JSON config file.
"""

import argparse
import json
import logging
import sys
from typing import Dict, List, Optional

from app.models.request import GridSpec, OutputSpec, RunConfig
from app.services.verification_service import write_text

logger = logging.getLogger(__name__)


def parse_pairs(pairs: Optional[List[str]], flag: str) -> Dict[str, float]:
    """
    Parse repeated k=v flags into floats.

    Raises:
        ValueError: for malformed pairs or non-numeric values
    """
    values: Dict[str, float] = {}
    for pair in pairs or []:
        key, sep, raw = pair.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"{flag} expects key=value, got {pair!r}")
        try:
            values[key.strip()] = float(raw)
        except ValueError:
            raise ValueError(f"{flag} {key} must be a number, got {raw!r}")
    return values


def add_run_arguments(parser: argparse.ArgumentParser, with_checks: bool = True) -> None:
    parser.add_argument("--config", help="JSON file mirroring RunConfig; flags override its values")
    parser.add_argument("--family", help="catalog family name")
    parser.add_argument("--param", action="append", metavar="K=V", help="family parameter (repeatable)")
    parser.add_argument("--grid", help="halton:N or regular:NxxNyxNzxNt")
    parser.add_argument("--seed", type=int, help="sampling seed")
    parser.add_argument("--tol", action="append", metavar="CHECK=V", help="tolerance override (repeatable)")
    if with_checks:
        parser.add_argument("--check", action="append", help="check to run (repeatable), default: family checks")
    add_output_arguments(parser)


def add_output_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="output path, stdout when omitted")
    parser.add_argument("--format", choices=("json", "csv"), default="json", help="output format")


def config_from_args(args: argparse.Namespace, checks: Optional[List[str]] = None) -> RunConfig:
    """
    Build a RunConfig from the optional config file and the flags.

    Raises:
        ValueError, pydantic.ValidationError: for incomplete or invalid configurations
        OSError: if the config file cannot be read
    """
    data: Dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    if args.family:
        data["family"] = args.family
    params = parse_pairs(args.param, "--param")
    if params:
        data["params"] = {**data.get("params", {}), **params}
    grid = dict(data.get("grid", {}))
    if args.grid:
        grid.update(GridSpec.parse_flag(args.grid).dict(exclude_unset=True))
    if args.seed is not None:
        grid["seed"] = args.seed
    data["grid"] = grid
    tolerances = parse_pairs(args.tol, "--tol")
    if tolerances:
        data["tolerances"] = {**data.get("tolerances", {}), **tolerances}
    if checks is not None:
        data["checks"] = checks
    elif getattr(args, "check", None):
        data["checks"] = args.check
    output = dict(data.get("output", {}))
    if args.out:
        output["path"] = args.out
    output["format"] = args.format
    data["output"] = OutputSpec(**output).dict()
    if "family" not in data:
        raise ValueError("a family is required (--family or the config file)")
    return RunConfig(**data)


def emit(text: str, path: Optional[str]) -> None:
    """Write text to path, or to stdout when no path is given."""
    if path:
        write_text(text, path)
        logger.info(f"✅ Output written to {path}")
    else:
        sys.stdout.write(text)
