from __future__ import annotations

import logging
from typing import List, Optional, Tuple

import numpy as np

from models.equilibrium import (
    AnalysisReport,
    EigenvalueRecord,
    Equilibrium,
    EquilibriumName,
    EquilibriumRecord,
    LyapunovAudit,
    LyapunovVariant,
    Regime,
    RegimeVerdict,
    StabilityVerdict,
)
from models.params import ModelParams, OdeState
from services.errors import DomainError, PreconditionError
from services.model_core import StateLike, check_assumptions, reaction_jacobian, reaction_terms, state_array

logger = logging.getLogger(__name__)

# Tolerance on grad(V).rhs <= 0 at sampled states; chain-rule rounding is far below this.
ORBITAL_ROUNDING = 1e-10
CLOSED_FORM_TOL = 1e-8


# ------------------------- Closed forms ---------------------------
def e12_coords(p: ModelParams) -> Tuple[float, float]:
    denom = p.r1 * p.r2 + p.a12 * p.a21
    u12 = p.r2 * (p.r1 - p.a12) / denom
    v12 = (p.r1 * p.r2 + p.r1 * p.a21) / denom
    return u12, v12


def e13_coords(p: ModelParams) -> Tuple[float, float]:
    return p.mu / p.a31, p.r1 * (p.a31 - p.mu) / (p.a13 * p.a31)


def estar_coords(p: ModelParams) -> Tuple[float, float, float]:
    u = p.mu / p.a31
    v = 1.0 + p.a21 * u / p.r2
    w = (p.r1 * (1.0 - u) - p.a12 * v) / p.a13
    return u, v, w


def compute_equilibria(p: ModelParams) -> List[Equilibrium]:
    """All six equilibria; nonexistent ones carry their formal coordinates."""
    report = check_assumptions(p)
    u12, v12 = e12_coords(p)
    u13, w13 = e13_coords(p)
    us, vs, ws = estar_coords(p)

    def make(name: EquilibriumName, u: float, v: float, w: float, exists: bool) -> Equilibrium:
        return Equilibrium(name=name, coords=OdeState(u=u, v=v, w=w), exists=exists)

    return [
        make(EquilibriumName.E0, 0.0, 0.0, 0.0, True),
        make(EquilibriumName.E1, 1.0, 0.0, 0.0, True),
        make(EquilibriumName.E2, 0.0, 1.0, 0.0, True),
        make(EquilibriumName.E12, u12, v12, 0.0, report.h1),
        make(EquilibriumName.E13, u13, 0.0, w13, report.h2),
        make(EquilibriumName.ESTAR, us, vs, ws, report.h3),
    ]


def get_equilibrium(p: ModelParams, name: EquilibriumName) -> Equilibrium:
    for e in compute_equilibria(p):
        if e.name == name:
            return e
    raise KeyError(name)


def regime(p: ModelParams) -> RegimeVerdict:
    """Row of the global classification table; mu == a31*u12 goes to E12_GAS."""
    if p.r1 <= p.a12:
        return RegimeVerdict(
            regime=Regime.E2_GAS,
            witness=f"r1<=a12 ({p.r1:g}<={p.a12:g})",
            attractor=EquilibriumName.E2,
        )
    u12, _ = e12_coords(p)
    threshold = p.a31 * u12
    if p.mu >= threshold:
        return RegimeVerdict(
            regime=Regime.E12_GAS,
            witness=f"r1>a12 and mu>=a31*u12 ({p.mu:g}>={threshold:.6g})",
            attractor=EquilibriumName.E12,
        )
    return RegimeVerdict(
        regime=Regime.ESTAR_GAS,
        witness=f"r1>a12 and mu<a31*u12 ({p.mu:g}<{threshold:.6g})",
        attractor=EquilibriumName.ESTAR,
    )


def classify_equilibrium(p: ModelParams, e: Equilibrium) -> Equilibrium:
    if not e.exists:
        raise PreconditionError(f"cannot classify {e.name.value}: it does not exist for these parameters")

    eigenvalues = np.linalg.eigvals(reaction_jacobian(p, e.coords))
    eigenvalues = sorted((complex(z) for z in eigenvalues), key=lambda z: (-z.real, -z.imag))

    attractor = regime(p).attractor
    if e.name == attractor:
        verdict = StabilityVerdict.GLOBALLY_STABLE_CLAIMED
    elif e.name in (EquilibriumName.E0, EquilibriumName.E1):
        verdict = StabilityVerdict.UNSTABLE
    elif e.name == EquilibriumName.ESTAR:
        verdict = StabilityVerdict.LOCALLY_STABLE
    else:
        # E2 with H1, E12 with mu < a31*u12, E13: one unstable direction off an invariant plane
        verdict = StabilityVerdict.SADDLE

    return e.model_copy(update={"eigenvalues": eigenvalues, "verdict": verdict})


# ---------------------- Routh-Hurwitz at E* -----------------------
def characteristic_coefficients(p: ModelParams) -> Tuple[float, float, float]:
    """(a2, a1, a0) of lambda^3 + a2 lambda^2 + a1 lambda + a0 at E*."""
    estar = get_equilibrium(p, EquilibriumName.ESTAR)
    if not estar.exists:
        raise PreconditionError("the positive equilibrium does not exist (H3 fails)")
    J = reaction_jacobian(p, estar.coords)
    a2 = -float(np.trace(J))
    a1 = float(
        J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
        + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1]
    )
    a0 = -float(np.linalg.det(J))
    return a2, a1, a0


def routh_hurwitz_holds(p: ModelParams) -> bool:
    a2, a1, a0 = characteristic_coefficients(p)
    return a2 > 0 and a0 > 0 and a2 * a1 > a0


# ------------------------ Lyapunov functions ----------------------
def _w_weight(p: ModelParams) -> float:
    return p.a13 * p.a21 / (p.a12 * p.a31)


def _u_weight(p: ModelParams, variant: LyapunovVariant) -> float:
    if variant == LyapunovVariant.PRINTED:
        return p.a12 / p.a21
    return p.a21 / p.a12


def _require(p: ModelParams, name: EquilibriumName) -> Equilibrium:
    e = get_equilibrium(p, name)
    if not e.exists:
        raise PreconditionError(f"{name.value} does not exist for these parameters")
    return e


def _positive(y: np.ndarray, components: Tuple[int, ...], label: str) -> None:
    for k in components:
        if np.any(y[k] <= 0.0):
            raise DomainError(f"{label} needs {'uvw'[k]} > 0, got {'uvw'[k]}={np.min(y[k]):g}")


def lyapunov_V12(p: ModelParams, s: StateLike):
    """V = (a21/a12)(u - u12 ln u) + (v - v12 ln v) + (a13 a21/(a12 a31)) w."""
    e = _require(p, EquilibriumName.E12)
    y = state_array(s)
    _positive(y, (0, 1), "V12")
    if np.any(y[2] < 0.0):
        raise DomainError(f"V12 needs w >= 0, got w={np.min(y[2]):g}")
    u12, v12 = e.coords.u, e.coords.v
    u, v, w = y[0], y[1], y[2]
    return (p.a21 / p.a12) * (u - u12 * np.log(u)) + (v - v12 * np.log(v)) + _w_weight(p) * w


def lyapunov_Vstar(p: ModelParams, s: StateLike, variant: LyapunovVariant = LyapunovVariant.CONSISTENT):
    """V = c_u (u - u* ln u) + (v - v* ln v) + (a13 a21/(a12 a31))(w - w* ln w).

    c_u is a12/a21 for the PRINTED variant and a21/a12 for CONSISTENT.
    """
    e = _require(p, EquilibriumName.ESTAR)
    y = state_array(s)
    _positive(y, (0, 1, 2), "Vstar")
    us, vs, ws = e.coords.u, e.coords.v, e.coords.w
    u, v, w = y[0], y[1], y[2]
    return (
        _u_weight(p, variant) * (u - us * np.log(u))
        + (v - vs * np.log(v))
        + _w_weight(p) * (w - ws * np.log(w))
    )


def lyapunov_gradient(which: str, p: ModelParams, s: StateLike,
                      variant: LyapunovVariant = LyapunovVariant.CONSISTENT) -> np.ndarray:
    y = state_array(s)
    u, v, w = y[0], y[1], y[2]
    if which == "V12":
        e = _require(p, EquilibriumName.E12)
        _positive(y, (0, 1), "V12")
        return np.array([
            (p.a21 / p.a12) * (1.0 - e.coords.u / u),
            1.0 - e.coords.v / v,
            _w_weight(p) * np.ones_like(w),
        ])
    if which == "Vstar":
        e = _require(p, EquilibriumName.ESTAR)
        _positive(y, (0, 1, 2), "Vstar")
        return np.array([
            _u_weight(p, variant) * (1.0 - e.coords.u / u),
            1.0 - e.coords.v / v,
            _w_weight(p) * (1.0 - e.coords.w / w),
        ])
    raise ValueError(f"unknown Lyapunov function: {which}")


def lyapunov_rate(which: str, p: ModelParams, s: StateLike):
    """Closed-form orbital derivative claimed for each function."""
    y = state_array(s)
    u, v, w = y[0], y[1], y[2]
    if which == "V12":
        e = _require(p, EquilibriumName.E12)
        u12, v12 = e.coords.u, e.coords.v
        return (
            -(p.r1 * p.a21 / p.a12) * (u - u12) ** 2
            - p.r2 * (v - v12) ** 2
            + (p.a13 * p.a21 / p.a12) * (u12 - p.mu / p.a31) * w
        )
    if which == "Vstar":
        e = _require(p, EquilibriumName.ESTAR)
        return -(p.r1 * p.a21 / p.a12) * (u - e.coords.u) ** 2 - p.r2 * (v - e.coords.v) ** 2
    raise ValueError(f"unknown Lyapunov function: {which}")


def orbital_derivative(which: str, p: ModelParams, s: StateLike,
                       variant: LyapunovVariant = LyapunovVariant.CONSISTENT):
    """grad(V) . rhs by the chain rule."""
    y = state_array(s)
    return np.sum(lyapunov_gradient(which, p, y, variant) * reaction_terms(p, y), axis=0)


def lyapunov_variant_audit(p: ModelParams, rng: np.random.Generator, samples: int = 100) -> List[LyapunovAudit]:
    """Evaluate every applicable Lyapunov candidate at random positive states.

    Both coefficient variants of Vstar are reported. CONSISTENT is the
    default elsewhere; PRINTED is kept here for comparison.
    """
    states = rng.uniform(0.05, 2.0, size=(3, samples))
    candidates: List[Tuple[str, Optional[LyapunovVariant]]] = []
    if get_equilibrium(p, EquilibriumName.E12).exists:
        candidates.append(("V12", None))
    if get_equilibrium(p, EquilibriumName.ESTAR).exists:
        candidates.extend([("Vstar", LyapunovVariant.PRINTED), ("Vstar", LyapunovVariant.CONSISTENT)])

    audits: List[LyapunovAudit] = []
    for which, variant in candidates:
        chain = orbital_derivative(which, p, states, variant or LyapunovVariant.CONSISTENT)
        closed = lyapunov_rate(which, p, states)
        mismatch = float(np.max(np.abs(chain - closed)))
        top = float(np.max(chain))
        audits.append(LyapunovAudit(
            function=which,
            variant=variant,
            samples=samples,
            max_orbital_derivative=top,
            max_closed_form_mismatch=mismatch,
            nonincreasing=top <= ORBITAL_ROUNDING,
            closed_form_matches=mismatch <= CLOSED_FORM_TOL,
        ))
        logger.debug("Lyapunov audit %s/%s: max dV/dt=%.3e mismatch=%.3e", which, variant, top, mismatch)
    return audits


# ---------------------------- Report ------------------------------
def _record(e: Equilibrium) -> EquilibriumRecord:
    return EquilibriumRecord(
        name=e.name,
        coords=e.coords,
        exists=e.exists,
        eigenvalues=[EigenvalueRecord(re=z.real, im=z.imag) for z in (e.eigenvalues or [])],
        verdict=e.verdict,
    )


def analyze(p: ModelParams, rng: Optional[np.random.Generator] = None, samples: int = 100) -> AnalysisReport:
    """Equilibria, eigenvalues, verdicts, regime, assumptions and Lyapunov audits."""
    rng = rng if rng is not None else np.random.default_rng(0)
    assumptions = check_assumptions(p)
    records = []
    for e in compute_equilibria(p):
        records.append(_record(classify_equilibrium(p, e) if e.exists else e))

    coeffs = None
    rh = None
    if assumptions.h3:
        coeffs = list(characteristic_coefficients(p))
        rh = routh_hurwitz_holds(p)

    verdict = regime(p)
    logger.info("Regime %s (%s)", verdict.regime.value, verdict.witness)
    return AnalysisReport(
        params=p,
        assumptions=assumptions,
        equilibria=records,
        regime=verdict,
        characteristic_coefficients=coeffs,
        routh_hurwitz=rh,
        lyapunov_audits=lyapunov_variant_audit(p, rng, samples),
    )
