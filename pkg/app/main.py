"""
Bianchi Einstein Metrics CLI

Entry point: `python -m app.main <subcommand> [flags]`.
Exit codes: 0 all checks pass, 2 a check failed, 1 configuration or domain error.
"""

import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

# Load environment variables from .env file
load_dotenv()

from app.config.settings import TOOL_VERSION, settings  # noqa: E402
from app.routes import classify, elliptic, embed, geodesic, verify  # noqa: E402
from app.services import BianchiError  # noqa: E402

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.log_level, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

SUBCOMMANDS = (verify, classify, geodesic, elliptic, embed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bianchi-einstein",
        description="Construct and verify diagonal Bianchi II, III and V Einstein metrics",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {TOOL_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in SUBCOMMANDS:
        module.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logger.info(f"🚀 Running {args.command}")
    try:
        code = args.handler(args)
    except ValidationError as e:
        logger.error(f"❌ Invalid configuration: {e}")
        return 1
    except (BianchiError, ValueError, OSError) as e:
        logger.error(f"❌ {args.command} failed: {str(e)}")
        return 1
    if code == 0:
        logger.info(f"✅ {args.command} passed")
    else:
        logger.warning(f"⚠️ {args.command} finished with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
