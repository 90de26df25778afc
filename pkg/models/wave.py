from __future__ import annotations

from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field

from models.trajectory import LyapunovReport


# -------------------------------
# CONFIGURATION
# -------------------------------
class WaveConfig(BaseModel):
    c: float = Field(..., gt=0, description="Wave speed.", json_schema_extra={"example": 1.5})
    d: float = Field(..., gt=0, description="Diffusion coefficient of w.")
    rho: float = Field(..., gt=0, description="c^2 / d.")
    sigma1: Optional[float] = Field(None, description="Lower wedge slope; unset when subcritical.")
    sigma2: float = Field(..., description="Upper wedge slope.")
    c_star: float = Field(..., description="Minimal wave speed 2*sqrt(d*(a31-mu)).")
    subcritical: bool = Field(..., description="True when c <= c_star.")

    model_config = {
        "frozen": True,
        "json_schema_extra": {
            "example": {
                "c": 1.5, "d": 1.0, "rho": 2.25, "sigma1": 0.80732, "sigma2": 1.06273,
                "c_star": 1.183216, "subcritical": False,
            }
        },
    }


class ProfileState(BaseModel):
    """A point (X1, X2, Y, Z) of the transformed profile system."""

    x1: float
    x2: float
    y: float
    z: float

    model_config = {"frozen": True}

    @classmethod
    def from_array(cls, s) -> "ProfileState":
        x1, x2, y, z = (float(v) for v in np.asarray(s, dtype=float).reshape(4))
        return cls(x1=x1, x2=x2, y=y, z=z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.y, self.z], dtype=float)


class FaceClass(str, Enum):
    INTERIOR = "Interior"
    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"
    Q5 = "Q5"
    P1 = "P1"
    P2 = "P2"
    EXTERIOR = "Exterior"


class WaveLyapunovVariant(str, Enum):
    """Third term of the profile Lyapunov function.

    PRINTED: Y - w* ln Y - (Y - Z)(1 - 1/Y).
    CONSISTENT: Y - w* ln Y - (Y - Z)(1 - w*/Y), whose orbital derivative is
    the nonpositive closed form.
    """

    PRINTED = "printed"
    CONSISTENT = "consistent"


# -------------------------------
# LINEARIZATION AT E1
# -------------------------------
class UnstableSpectrum(BaseModel):
    lambda0: float = Field(..., description="Stable eigenvalue -r1.")
    lambda1: float = Field(..., description="r2 + a21.")
    lambda2: complex = Field(..., description="(rho + sqrt(rho^2 - 4 rho (a31-mu))) / 2.")
    lambda3: complex = Field(..., description="(rho - sqrt(rho^2 - 4 rho (a31-mu))) / 2.")
    h1: np.ndarray = Field(..., description="Eigenvector for lambda1.")
    h2: np.ndarray = Field(..., description="Eigenvector for lambda2 (third component 1).")
    h3: np.ndarray = Field(..., description="Eigenvector for lambda3 (third component 1).")
    real: bool = Field(..., description="lambda2, lambda3 real.")
    degenerate: bool = Field(..., description="lambda2 == lambda3 (c == c_star).")

    model_config = {"arbitrary_types_allowed": True, "frozen": True}


# -------------------------------
# SHOOTING
# -------------------------------
class ShotVerdict(str, Enum):
    EXIT_P1 = "ExitP1"
    EXIT_P2 = "ExitP2"
    EXIT_OTHER = "ExitOther"
    STAYED_TO_HORIZON = "StayedToHorizon"
    CONVERGED_ESTAR = "ConvergedEstar"


class ShotOutcome(BaseModel):
    verdict: ShotVerdict
    exit_time: Optional[float] = Field(None, description="Time of the terminating event, if any.")
    final: ProfileState
    times: Optional[np.ndarray] = Field(default=None, repr=False)
    states: Optional[np.ndarray] = Field(default=None, repr=False, description="Shape (n, 4).")
    dense: Optional[object] = Field(default=None, exclude=True, repr=False)

    model_config = {"arbitrary_types_allowed": True, "frozen": True}


class BoundaryCheck(BaseModel):
    face: FaceClass
    y_dot: float
    slope_ratio: float = Field(..., description="Zdot / Ydot at the point.")
    points_out: bool


class WaveResult(BaseModel):
    config: WaveConfig
    eps: float
    z_star: float = Field(..., description="Parameter on the unstable-manifold curve selecting the wave.")
    bracket_width: float
    stages: int = Field(..., description="Number of bisection stages (1 = curve only).")
    max_jump: float = Field(0.0, description="Largest Z correction applied at a stage restart.")
    times: np.ndarray = Field(..., repr=False)
    states: np.ndarray = Field(..., repr=False, description="Shape (n, 4).")
    segment_starts: List[int] = Field(default_factory=list, description="Sample index where each stage begins.")
    tail_distance: float = Field(..., description="Sup distance of the tail window from the E* lift.")
    final_distance: float
    lyapunov: LyapunovReport
    certified: bool
    reason: str = ""

    model_config = {"arbitrary_types_allowed": True}
