"""
Response Models

Pydantic models for everything the verification harness reports.
These models keep report output consistent and serialize deterministically.
"""

from pydantic import BaseModel, Field, validator
from typing import Any, Dict, List, Optional

CHECK_STATUSES = ("pass", "fail", "flagged")
PETROV_TYPES = ("O", "D", "I")


class PetrovLabel(BaseModel):
    """
    Petrov-like classification of the Weyl curvature at a point.

    Attributes:
        signature (str): "euclidean" or "lorentzian"
        plus (str): type of W+ (Euclidean) or of the Weyl spinor (Lorentzian)
        minus (str): type of W- (equal to plus for Lorentzian metrics)
        eigenvalues (Dict[str, List[float]]): eigenvalues used for the decision
        ambiguous (bool): True when an eigenvalue gap sits near the threshold
    """

    signature: str = Field(..., description="Metric signature", example="euclidean")
    plus: str = Field(..., description="Type of the self-dual side", example="D")
    minus: str = Field(..., description="Type of the anti-self-dual side", example="D")
    eigenvalues: Dict[str, List[float]] = Field(default_factory=dict, description="Eigenvalues by side")
    ambiguous: bool = Field(default=False, description="Multiplicity decision near threshold")

    @validator("plus", "minus")
    def validate_type(cls, v):
        """Only the types a diagonal Bianchi metric can produce."""
        if v not in PETROV_TYPES:
            raise ValueError(f"unknown Petrov type {v!r}")
        return v

    @property
    def label(self) -> str:
        if self.signature == "lorentzian":
            return self.plus
        return f"({self.plus},{self.minus})"

    class Config:
        """Pydantic configuration."""
        schema_extra = {
            "example": {
                "signature": "euclidean",
                "plus": "D",
                "minus": "O",
                "eigenvalues": {"plus": [-0.2, 0.1, 0.1], "minus": [0.0, 0.0, 0.0]},
                "ambiguous": False
            }
        }


class CheckResult(BaseModel):
    """
    Outcome of one named check over the sample grid.

    Attributes:
        name (str): check name, e.g. "einstein"
        status (str): pass, fail or flagged
        worst_residual (Optional[float]): largest residual over the grid
        worst_point (Optional[List[float]]): chart point of the largest residual
        tolerance (Optional[float]): tolerance applied
        detail (Dict[str, Any]): check-specific extras (labels, notes, counts)
    """

    name: str = Field(..., description="Check name", example="einstein")
    status: str = Field(..., description="pass, fail or flagged", example="pass")
    worst_residual: Optional[float] = Field(None, description="Largest residual", example=3.2e-12)
    worst_point: Optional[List[float]] = Field(None, description="Where the largest residual occurred")
    tolerance: Optional[float] = Field(None, description="Tolerance applied", example=1e-6)
    detail: Dict[str, Any] = Field(default_factory=dict, description="Check-specific details")

    @validator("status")
    def validate_status(cls, v):
        """Status must be one of the known outcomes."""
        if v not in CHECK_STATUSES:
            raise ValueError(f"status must be one of {CHECK_STATUSES}")
        return v

    class Config:
        """Pydantic configuration."""
        schema_extra = {
            "example": {
                "name": "einstein",
                "status": "pass",
                "worst_residual": 3.2e-12,
                "worst_point": [0.1, -0.4, 0.3, 1.7],
                "tolerance": 1e-6,
                "detail": {"points": 16}
            }
        }


class Report(BaseModel):
    """
    Deterministic record of a verification run.

    Attributes:
        family (str): catalog family name
        params (Dict[str, Any]): family parameters as given
        seed (int): sample seed
        tool_version (str): package version
        checks (List[CheckResult]): one entry per requested check, in request order
    """

    family: str = Field(..., description="Catalog family", example="bianchi2")
    params: Dict[str, Any] = Field(default_factory=dict, description="Family parameters")
    seed: int = Field(..., description="Sampling seed", example=7)
    tool_version: str = Field(..., description="Package version", example="1.0.0")
    checks: List[CheckResult] = Field(default_factory=list, description="Check outcomes")

    @property
    def passed(self) -> bool:
        return all(check.status != "fail" for check in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 2

    class Config:
        """Pydantic configuration."""
        schema_extra = {
            "example": {
                "family": "bianchi2",
                "params": {"epsilon": 1, "m": 1.0, "l": 1.0, "lambda": -0.3},
                "seed": 7,
                "tool_version": "1.0.0",
                "checks": []
            }
        }
