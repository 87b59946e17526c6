"""
Settings

Tolerance tiers, integrator defaults and sampling defaults, each overridable
through BIANCHI_* environment variables (a .env file is honoured once
load_dotenv() has run in the entry point).
"""

import os
from typing import Dict

TOOL_VERSION = "1.0.0"

CHECK_NAMES = (
    "einstein",
    "weyl",
    "petrov",
    "killing",
    "yano",
    "ks",
    "ode",
    "embedding",
    "geodesic",
    "elliptic-selftest",
)


def _float_env(name: str, default: float) -> float:
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"environment variable {name}={value!r} is not a number")


def _int_env(name: str, default: int) -> int:
    return int(_float_env(name, float(default)))


class Settings:
    """Runtime configuration read from the environment."""

    def __init__(self):
        self.tol_exact = _float_env("BIANCHI_TOL_EXACT", 1e-9)
        self.tol_fd = _float_env("BIANCHI_TOL_FD", 1e-6)
        self.tol_elliptic = _float_env("BIANCHI_TOL_ELLIPTIC", 1e-5)
        self.rtol = _float_env("BIANCHI_RTOL", 1e-10)
        self.atol = _float_env("BIANCHI_ATOL", 1e-10)
        self.grid_points = _int_env("BIANCHI_GRID_POINTS", 20)
        self.seed = _int_env("BIANCHI_SEED", 0)
        self.log_level = os.getenv("BIANCHI_LOG_LEVEL", "INFO").upper()
        self.max_workers = _int_env("BIANCHI_MAX_WORKERS", 4)

    def check_tolerances(self) -> Dict[str, float]:
        """Default tolerance per check name."""
        return {
            "einstein": self.tol_fd,
            "weyl": self.tol_fd,
            "petrov": self.tol_fd,
            "killing": 1e-7,
            "yano": 1e-7,
            "ks": 1e-7,
            "ode": self.tol_exact,
            "embedding": 1e-8,
            "geodesic": 1e-8,
            "elliptic-selftest": 1e-8,
        }

    def tolerance_for(self, check: str, family: str = "") -> float:
        if check == "einstein" and family == "bianchi5_minkowski":
            return self.tol_elliptic
        return self.check_tolerances()[check]


# Global instance
settings = Settings()
