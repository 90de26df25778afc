from __future__ import annotations

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field

from models.params import AssumptionReport, ModelParams, OdeState


class EquilibriumName(str, Enum):
    E0 = "E0"
    E1 = "E1"
    E2 = "E2"
    E12 = "E12"
    E13 = "E13"
    ESTAR = "Estar"


class StabilityVerdict(str, Enum):
    UNSTABLE = "Unstable"
    SADDLE = "Saddle"
    LOCALLY_STABLE = "LocallyStable"
    GLOBALLY_STABLE_CLAIMED = "GloballyStable-claimed"


class Regime(str, Enum):
    E2_GAS = "E2_GAS"
    E12_GAS = "E12_GAS"
    ESTAR_GAS = "Estar_GAS"


class LyapunovVariant(str, Enum):
    """Leading coefficient of the interior Lyapunov function.

    PRINTED uses a12/a21 in front of the u-term; CONSISTENT uses a21/a12,
    the coefficient whose orbital derivative is the closed form
    -(r1*a21/a12)(u-u*)^2 - r2(v-v*)^2.
    """

    PRINTED = "printed"
    CONSISTENT = "consistent"


# -------------------------------
# EQUILIBRIA
# -------------------------------
class Equilibrium(BaseModel):
    name: EquilibriumName = Field(..., description="Equilibrium label.", json_schema_extra={"example": "Estar"})
    coords: OdeState = Field(..., description="Coordinates (u, v, w); may be nonbiological when exists is false.")
    exists: bool = Field(..., description="Whether the equilibrium lies in the closed positive octant.")
    eigenvalues: Optional[List[complex]] = Field(
        default=None,
        description="Eigenvalues of the reaction Jacobian at coords (set by classification).",
    )
    verdict: Optional[StabilityVerdict] = Field(default=None, description="Stability verdict (set by classification).")

    model_config = {
        "frozen": True,
        "json_schema_extra": {
            "example": {
                "name": "Estar",
                "coords": {"u": 0.3, "v": 1.2, "w": 0.62},
                "exists": True,
                "eigenvalues": None,
                "verdict": None,
            }
        },
    }


class RegimeVerdict(BaseModel):
    regime: Regime = Field(..., description="Row of the global classification table that applies.")
    witness: str = Field(..., description="The inequalities that selected the regime.", json_schema_extra={"example": "r1>a12 and mu<a31*u12"})
    attractor: EquilibriumName = Field(..., description="Equilibrium claimed globally asymptotically stable.")

    model_config = {"frozen": True}


# -------------------------------
# REPORTS
# -------------------------------
class EigenvalueRecord(BaseModel):
    re: float
    im: float


class EquilibriumRecord(BaseModel):
    """One line of the analysis report."""
    name: EquilibriumName
    coords: OdeState
    exists: bool
    eigenvalues: List[EigenvalueRecord] = Field(default_factory=list)
    verdict: Optional[StabilityVerdict] = None


class LyapunovAudit(BaseModel):
    """Outcome of evaluating one Lyapunov candidate at random positive states."""
    function: str = Field(..., description="V12 or Vstar.")
    variant: Optional[LyapunovVariant] = Field(default=None, description="Coefficient variant (Vstar only).")
    samples: int = Field(..., ge=1)
    max_orbital_derivative: float = Field(..., description="max of grad(V).rhs over the samples.")
    max_closed_form_mismatch: float = Field(..., description="max |grad(V).rhs - closed form| over the samples.")
    nonincreasing: bool = Field(..., description="grad(V).rhs <= 0 at every sample (up to rounding).")
    closed_form_matches: bool = Field(..., description="Closed form agrees with the chain rule to 1e-8.")


class AnalysisReport(BaseModel):
    params: ModelParams
    assumptions: AssumptionReport
    equilibria: List[EquilibriumRecord]
    regime: RegimeVerdict
    characteristic_coefficients: Optional[List[float]] = Field(
        default=None, description="(a2, a1, a0) of the cubic at the positive equilibrium, if it exists."
    )
    routh_hurwitz: Optional[bool] = Field(default=None, description="a2>0, a0>0 and a2*a1>a0 at the positive equilibrium.")
    lyapunov_audits: List[LyapunovAudit] = Field(default_factory=list)
