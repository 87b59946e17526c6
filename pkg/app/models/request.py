"""
Request Models

Pydantic models for validating run configurations, whether they come from a
JSON config file or from command-line flags.
"""

from pydantic import BaseModel, Field, validator
from typing import Dict, List, Optional, Tuple

from app.config.families import FAMILIES, family_entry, family_names
from app.config.settings import CHECK_NAMES, settings

GRID_MODES = ("halton", "regular")
OUTPUT_FORMATS = ("json", "csv")
COORDINATES = ("x", "y", "z", "tau")


class GridSpec(BaseModel):
    """
    Sampling grid over the chart.

    Attributes:
        mode (str): "halton" (seeded quasi-random) or "regular" (tensor grid)
        count (int): number of points in halton mode
        seed (int): scramble seed for halton mode
        ranges (Dict[str, Tuple[float, float]]): per-coordinate ranges; tau defaults to the family window
        counts (Dict[str, int]): per-coordinate counts in regular mode
    """

    mode: str = Field(default="halton", description="halton or regular", example="halton")
    count: int = Field(default_factory=lambda: settings.grid_points, description="Points in halton mode", ge=1, example=20)
    seed: int = Field(default_factory=lambda: settings.seed, description="Sampling seed", example=0)
    ranges: Dict[str, Tuple[float, float]] = Field(default_factory=dict, description="Coordinate ranges")
    counts: Dict[str, int] = Field(default_factory=dict, description="Points per coordinate in regular mode")

    @validator("mode")
    def validate_mode(cls, v):
        """Only the two supported grid kinds."""
        if v not in GRID_MODES:
            raise ValueError(f"grid mode must be one of {GRID_MODES}")
        return v

    @validator("ranges")
    def validate_ranges(cls, v):
        """Known coordinates with increasing bounds."""
        for name, (lower, upper) in v.items():
            if name not in COORDINATES:
                raise ValueError(f"unknown coordinate {name!r}, expected one of {COORDINATES}")
            if not lower < upper:
                raise ValueError(f"range for {name} must be increasing, got ({lower}, {upper})")
        return v

    @validator("counts")
    def validate_counts(cls, v):
        for name, count in v.items():
            if name not in COORDINATES:
                raise ValueError(f"unknown coordinate {name!r}, expected one of {COORDINATES}")
            if count < 1:
                raise ValueError(f"count for {name} must be positive")
        return v

    @classmethod
    def parse_flag(cls, text: str, seed: Optional[int] = None) -> "GridSpec":
        """
        Parse a --grid flag: "halton:N" or "regular:NxXxNyxNzxNt".

        Args:
            text (str): flag value
            seed (Optional[int]): seed to attach
        """
        mode, _, rest = text.partition(":")
        data = {"mode": mode}
        if seed is not None:
            data["seed"] = seed
        if mode == "halton" and rest:
            data["count"] = int(rest)
        elif mode == "regular" and rest:
            sizes = [int(part) for part in rest.lower().split("x")]
            if len(sizes) != len(COORDINATES):
                raise ValueError(f"regular grid needs {len(COORDINATES)} counts, got {rest!r}")
            data["counts"] = dict(zip(COORDINATES, sizes))
        return cls(**data)

    class Config:
        """Pydantic configuration."""
        schema_extra = {
            "example": {
                "mode": "halton",
                "count": 20,
                "seed": 0,
                "ranges": {"x": [-1.0, 1.0], "tau": [1.2, 2.5]}
            }
        }


class OutputSpec(BaseModel):
    """Where and how the report is written."""

    path: Optional[str] = Field(None, description="Output path, stdout when missing", example="report.json")
    format: str = Field(default="json", description="json or csv", example="json")

    @validator("format")
    def validate_format(cls, v):
        if v not in OUTPUT_FORMATS:
            raise ValueError(f"output format must be one of {OUTPUT_FORMATS}")
        return v


class RunConfig(BaseModel):
    """
    Model for a verification run.

    Attributes:
        family (str): catalog family name
        params (Dict[str, float]): family parameters
        grid (GridSpec): sampling specification
        checks (List[str]): requested checks, defaults to the family's list
        tolerances (Dict[str, float]): per-check tolerance overrides
        output (OutputSpec): report destination
    """

    family: str = Field(..., description="Catalog family", example="bianchi3")
    params: Dict[str, float] = Field(default_factory=dict, description="Family parameters")
    grid: GridSpec = Field(default_factory=GridSpec, description="Sampling grid")
    checks: List[str] = Field(default_factory=list, description="Checks to run")
    tolerances: Dict[str, float] = Field(default_factory=dict, description="Tolerance overrides")
    output: OutputSpec = Field(default_factory=OutputSpec, description="Report destination")

    @validator("family")
    def validate_family(cls, v):
        """Family must be registered."""
        if v not in FAMILIES:
            raise ValueError(f"unknown family {v!r}, expected one of {family_names()}")
        return v

    @validator("params")
    def validate_params(cls, v, values):
        """Required parameters present, nothing unexpected."""
        family = values.get("family")
        if family is None:
            return v
        entry = family_entry(family)
        missing = [name for name in entry["required"] if name not in v]
        if family == "bianchi5_minkowski" and "lambda" in v and "theta" in missing:
            missing.remove("theta")
        if missing:
            raise ValueError(f"family {family} is missing parameters {missing}")
        allowed = set(entry["required"]) | set(entry["optional"]) | set(entry["aliases"])
        unexpected = sorted(set(v) - allowed)
        if unexpected:
            raise ValueError(f"family {family} does not take parameters {unexpected}")
        return v

    @validator("checks", always=True)
    def validate_checks(cls, v, values):
        """Known checks without repeats; the family defaults when empty."""
        unknown = [name for name in v if name not in CHECK_NAMES]
        if unknown:
            raise ValueError(f"unknown checks {unknown}, expected a subset of {list(CHECK_NAMES)}")
        if len(set(v)) != len(v):
            raise ValueError("checks must not repeat")
        if not v and values.get("family") in FAMILIES:
            return list(family_entry(values["family"])["checks"])
        return v

    @validator("tolerances")
    def validate_tolerances(cls, v):
        for name, value in v.items():
            if name not in CHECK_NAMES:
                raise ValueError(f"tolerance given for unknown check {name!r}")
            if not value > 0.0:
                raise ValueError(f"tolerance for {name} must be positive")
        return v

    class Config:
        """Pydantic configuration."""
        schema_extra = {
            "example": {
                "family": "bianchi3",
                "params": {"epsilon": 1, "gamma0": -0.6666666666666666, "lambda": -1.0},
                "grid": {"mode": "halton", "count": 20, "seed": 0},
                "checks": ["einstein", "petrov"],
                "tolerances": {"einstein": 1e-6},
                "output": {"path": "report.json", "format": "json"}
            }
        }
