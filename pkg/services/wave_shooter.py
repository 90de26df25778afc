"""Traveling-wave profiles by shooting in the transformed profile system.

A wave of speed c connecting E1 = (1, 0, 0) to E* corresponds to an orbit of
the four-dimensional system in (X1, X2, Y, Z) that leaves the lift of E1 along
its unstable manifold and stays forever in the wedge

    0 <= X1 <= 1, 0 <= X2 <= 1 + a21/r2, Y >= 0, sigma1*Y <= Z <= sigma2*Y.

Orbits may only leave the wedge through its two slanted faces P1 (Z = sigma1 Y)
and P2 (Z = sigma2 Y), and they cross those faces transversally outward. A
one-parameter curve of starting points whose ends lie on P1 and P2 therefore
contains a point whose orbit never exits; bisection on the exit face locates
it. The lift of E* is a saddle of the profile system, so a bisected orbit only
shadows the connection for a finite time; `find_wave` repeats the same
dichotomy on the segment {sigma1 Y <= Z <= sigma2 Y} through the last point
where the bracketing orbits still agree, until the orbit reaches E*.
"""
from __future__ import annotations

import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from models.params import ModelParams
from models.trajectory import LyapunovReport
from models.wave import (
    BoundaryCheck,
    FaceClass,
    ProfileState,
    ShotOutcome,
    ShotVerdict,
    UnstableSpectrum,
    WaveConfig,
    WaveLyapunovVariant,
    WaveResult,
)
from services.equilibria import estar_coords
from services.errors import (
    DomainError,
    PreconditionError,
    ShootingError,
    SubcriticalWaveError,
    WaveConfigurationError,
)
from services.model_core import check_assumptions

logger = logging.getLogger(__name__)

ProfileLike = Union[ProfileState, np.ndarray, Sequence[float]]

FACE_TOL = 1e-12
EVENT_BAND = 1e-10
EPS_MAX = 0.05
SCAN_SAMPLES = 64
DEFAULT_HORIZON = 500.0
SHOT_RTOL = 1e-10
SHOT_ATOL = 1e-12
RESTART_TOL = 1e-6
TAIL_WINDOW = 0.2
TAIL_TOL = 1e-3
LYAPUNOV_REL_TOL = 1e-7
MAX_STAGES = 200
AGREEMENT_SAMPLES = 2000


# -------------------------- Configuration --------------------------
def wave_config(p: ModelParams, c: float) -> WaveConfig:
    if not c > 0:
        raise PreconditionError(f"wave speed must be positive, got c={c}")
    if not p.a31 > p.mu:
        raise PreconditionError(f"waves from E1 need a31 > mu (got a31={p.a31:g}, mu={p.mu:g})")

    growth = p.a31 - p.mu
    rho = c * c / p.d
    c_star = 2.0 * np.sqrt(p.d * growth)
    sigma2 = (rho + np.sqrt(rho * rho + 4.0 * rho * p.mu)) / (2.0 * rho)
    disc = rho * rho - 4.0 * rho * growth
    subcritical = disc <= 0.0
    sigma1 = None if subcritical else (rho + np.sqrt(disc)) / (2.0 * rho)

    return WaveConfig(
        c=c, d=p.d, rho=rho, sigma1=sigma1, sigma2=sigma2,
        c_star=float(c_star), subcritical=bool(subcritical),
    )


def _require_supercritical(cfg: WaveConfig) -> None:
    if cfg.subcritical or cfg.sigma1 is None:
        raise PreconditionError(f"c={cfg.c:g} does not exceed c_star={cfg.c_star:.6f}; the wedge is undefined")


def _profile_array(s: ProfileLike) -> np.ndarray:
    """Float array whose first axis is (X1, X2, Y, Z)."""
    arr = s.as_array() if isinstance(s, ProfileState) else np.asarray(s, dtype=float)
    if arr.shape[:1] != (4,):
        raise PreconditionError(f"expected (X1, X2, Y, Z), got shape {arr.shape}")
    return arr


def _profile_point(s: ProfileLike) -> np.ndarray:
    arr = _profile_array(s)
    if arr.ndim != 1:
        raise PreconditionError(f"expected a single profile point, got shape {arr.shape}")
    return arr


def estar_lift(p: ModelParams) -> np.ndarray:
    if not check_assumptions(p).h3:
        raise PreconditionError("the positive equilibrium does not exist (H3 fails)")
    u, v, w = estar_coords(p)
    return np.array([u, v, w, w])


# ------------------------- Vector field ----------------------------
def _profile_terms(p: ModelParams, rho: float, s: np.ndarray) -> np.ndarray:
    x1, x2, y, z = s
    return np.array([
        x1 * (p.r1 * (1.0 - x1) - p.a12 * x2 - p.a13 * y),
        x2 * (p.r2 * (1.0 - x2) + p.a21 * x1),
        rho * (y - z),
        y * (-p.mu + p.a31 * x1),
    ])


def profile_rhs(p: ModelParams, cfg: WaveConfig, s: ProfileLike) -> np.ndarray:
    """Profile vector field at a point or at a stack of shape (4, ...)."""
    _require_supercritical(cfg)
    return _profile_terms(p, cfg.rho, _profile_array(s))


def profile_jacobian(p: ModelParams, cfg: WaveConfig, s: ProfileLike) -> np.ndarray:
    x1, x2, y, _ = _profile_point(s)
    rho = cfg.rho
    return np.array([
        [p.r1 * (1.0 - 2.0 * x1) - p.a12 * x2 - p.a13 * y, -p.a12 * x1, -p.a13 * x1, 0.0],
        [p.a21 * x2, p.r2 * (1.0 - 2.0 * x2) + p.a21 * x1, 0.0, 0.0],
        [0.0, 0.0, rho, -rho],
        [p.a31 * y, 0.0, -p.mu + p.a31 * x1, 0.0],
    ])


def profile_jacobian_at_e1(p: ModelParams, cfg: WaveConfig) -> np.ndarray:
    return profile_jacobian(p, cfg, np.array([1.0, 0.0, 0.0, 0.0]))


# --------------------------- The wedge -----------------------------
def x2_ceiling(p: ModelParams) -> float:
    return 1.0 + p.a21 / p.r2


def classify_point(cfg: WaveConfig, p: ModelParams, s: ProfileLike) -> FaceClass:
    """Face of the wedge containing s.

    Equalities are tested within 1e-12. Q faces take priority over P faces
    at shared edges, and Q1..Q5 are tested in order.
    """
    _require_supercritical(cfg)
    x1, x2, y, z = _profile_point(s)
    b = x2_ceiling(p)
    tol = FACE_TOL
    s1, s2 = cfg.sigma1, cfg.sigma2

    if (x1 < -tol or x1 > 1.0 + tol or x2 < -tol or x2 > b + tol or y < -tol
            or z < s1 * y - tol or z > s2 * y + tol):
        return FaceClass.EXTERIOR
    if abs(x1) <= tol:
        return FaceClass.Q1
    if abs(x1 - 1.0) <= tol:
        return FaceClass.Q2
    if abs(x2) <= tol:
        return FaceClass.Q3
    if abs(x2 - b) <= tol:
        return FaceClass.Q4
    if abs(y) <= tol and abs(z) <= tol:
        return FaceClass.Q5
    if abs(z - s1 * y) <= tol:
        return FaceClass.P1
    if abs(z - s2 * y) <= tol:
        return FaceClass.P2
    return FaceClass.INTERIOR


def boundary_vector_check(cfg: WaveConfig, p: ModelParams, s: ProfileLike) -> BoundaryCheck:
    """Direction of the field on P1 or P2.

    On P1 the field points out iff Ydot > 0 and Zdot/Ydot < sigma1; on P2 iff
    Ydot < 0 and Zdot/Ydot < sigma2.
    """
    face = classify_point(cfg, p, s)
    if face not in (FaceClass.P1, FaceClass.P2):
        raise PreconditionError(f"point is on {face.value}, not on P1 or P2")
    _, _, ydot, zdot = _profile_terms(p, cfg.rho, _profile_point(s))
    ratio = zdot / ydot if ydot != 0.0 else np.inf
    if face == FaceClass.P1:
        out = ydot > 0.0 and ratio < cfg.sigma1
    else:
        out = ydot < 0.0 and ratio < cfg.sigma2
    return BoundaryCheck(face=face, y_dot=float(ydot), slope_ratio=float(ratio), points_out=bool(out))


# ----------------------- Linearization at E1 -----------------------
def unstable_spectrum(p: ModelParams, cfg: WaveConfig) -> UnstableSpectrum:
    growth = p.a31 - p.mu
    if not growth > 0:
        raise PreconditionError("the unstable spectrum at E1 needs a31 > mu")
    rho = cfg.rho
    disc = rho * rho - 4.0 * rho * growth
    root = np.emath.sqrt(disc)
    lam1 = p.r2 + p.a21
    lam2 = (rho + root) / 2.0
    lam3 = (rho - root) / 2.0
    boundary = 1e-12 * rho * rho
    real = bool(disc >= -boundary)
    if real:
        lam2, lam3 = float(np.real(lam2)), float(np.real(lam3))

    def vector(lam) -> np.ndarray:
        return np.array([-p.a13 / (lam + p.r1), 0.0, 1.0, growth / lam])

    return UnstableSpectrum(
        lambda0=-p.r1,
        lambda1=lam1,
        lambda2=complex(lam2),
        lambda3=complex(lam3),
        h1=np.array([-p.a12 / (lam1 + p.r1), 1.0, 0.0, 0.0]),
        h2=vector(lam2),
        h3=vector(lam3),
        real=real,
        degenerate=bool(abs(disc) <= boundary),
    )


def tangent_chart(spectrum: UnstableSpectrum) -> np.ndarray:
    """Matrix taking eigen-coordinates (k1, k2, k3) to (x2, y, z)."""
    return np.column_stack([spectrum.h1[1:], spectrum.h2[1:], spectrum.h3[1:]])


def gamma_point(p: ModelParams, cfg: WaveConfig, eps: float, z: float) -> ProfileState:
    """Point (x1, eps, eps, z) on the linearized unstable manifold of E1."""
    _require_supercritical(cfg)
    if not 0.0 < eps <= EPS_MAX:
        raise WaveConfigurationError(f"eps={eps:g} is outside (0, {EPS_MAX:g}]; retry with a smaller eps")
    z_lo, z_hi = cfg.sigma1 * eps, cfg.sigma2 * eps
    if z < z_lo or z > z_hi:
        raise PreconditionError(f"z={z:g} outside [{z_lo:g}, {z_hi:g}]")

    spectrum = unstable_spectrum(p, cfg)
    if spectrum.degenerate:
        raise PreconditionError("repeated unstable eigenvalue at c = c_star")
    k = np.linalg.solve(tangent_chart(spectrum), np.array([eps, eps, z]))
    x1 = 1.0 + k[0] * spectrum.h1[0] + k[1] * spectrum.h2[0] + k[2] * spectrum.h3[0]
    return ProfileState(x1=float(x1), x2=eps, y=eps, z=z)


# ----------------------------- Shots -------------------------------
def _face_events(p: ModelParams, cfg: WaveConfig, target: Optional[np.ndarray], converge_tol: float) -> list:
    s1, s2 = cfg.sigma1, cfg.sigma2
    b = x2_ceiling(p)
    band = EVENT_BAND

    def exit_p1(t, s):
        return s[3] - s1 * s[2]

    def exit_p2(t, s):
        return s2 * s[2] - s[3]

    def exit_q(t, s):
        return min(s[0] + band, 1.0 + band - s[0], s[1] + band, b + band - s[1], s[2] + band)

    events = [exit_p1, exit_p2, exit_q]
    if target is not None:
        def converged(t, s):
            return np.max(np.abs(s - target)) - converge_tol
        events.append(converged)

    for event in events:
        event.terminal = True
        event.direction = -1
    return events


_EVENT_VERDICTS = (ShotVerdict.EXIT_P1, ShotVerdict.EXIT_P2, ShotVerdict.EXIT_OTHER, ShotVerdict.CONVERGED_ESTAR)


def shoot(p: ModelParams, cfg: WaveConfig, start: ProfileLike, horizon: float = DEFAULT_HORIZON,
          converge_tol: float = 1e-6, dense: bool = False) -> ShotOutcome:
    """Integrate from start until it exits the wedge, reaches E*, or hits the horizon."""
    s0 = _profile_point(start)
    face = classify_point(cfg, p, s0)
    if face == FaceClass.EXTERIOR:
        raise PreconditionError(f"start {s0} is outside the wedge")

    target = estar_lift(p) if check_assumptions(p).h3 else None
    at_start = ProfileState.from_array(s0)

    def immediate(verdict: ShotVerdict) -> ShotOutcome:
        return ShotOutcome(verdict=verdict, exit_time=0.0, final=at_start,
                           times=np.array([0.0]), states=s0[None, :].copy())

    if target is not None and np.max(np.abs(s0 - target)) <= converge_tol:
        return immediate(ShotVerdict.CONVERGED_ESTAR)
    if face in (FaceClass.P1, FaceClass.P2) and boundary_vector_check(cfg, p, s0).points_out:
        return immediate(ShotVerdict.EXIT_P1 if face == FaceClass.P1 else ShotVerdict.EXIT_P2)

    sol = solve_ivp(
        lambda t, s: _profile_terms(p, cfg.rho, s),
        (0.0, horizon),
        s0,
        method="DOP853",
        rtol=SHOT_RTOL,
        atol=SHOT_ATOL,
        events=_face_events(p, cfg, target, converge_tol),
        dense_output=dense,
    )
    if sol.status == -1:
        raise ShootingError(f"profile integration failed: {sol.message}")

    times, states = sol.t, sol.y.T
    if sol.status == 1:
        hits = [(te[0], i) for i, te in enumerate(sol.t_events) if te.size]
        exit_time, index = min(hits)
        verdict = _EVENT_VERDICTS[index]
        final = sol.y_events[index][0]
    else:
        exit_time, verdict, final = None, ShotVerdict.STAYED_TO_HORIZON, states[-1]

    return ShotOutcome(
        verdict=verdict,
        exit_time=exit_time,
        final=ProfileState.from_array(final),
        times=times,
        states=states,
        dense=sol.sol if dense else None,
    )


# ------------------------ Profile Lyapunov -------------------------
def _lyapunov_parts(p: ModelParams, s: np.ndarray):
    x1, x2, y, z = s[0], s[1], s[2], s[3]
    if np.any(x1 <= 0) or np.any(x2 <= 0) or np.any(y <= 0):
        raise DomainError("wave Lyapunov function needs X1, X2, Y > 0")
    return x1, x2, y, z


def wave_lyapunov(p: ModelParams, cfg: WaveConfig, s: ProfileLike,
                  variant: WaveLyapunovVariant = WaveLyapunovVariant.CONSISTENT) -> Tuple[float, float]:
    """L(s) and its closed-form orbital derivative.

    Works on a single point or on a stack of shape (4, n).
    """
    arr = s.as_array() if isinstance(s, ProfileState) else np.asarray(s, dtype=float)
    x1, x2, y, z = _lyapunov_parts(p, arr)
    us, vs, ws = estar_coords(p)
    k = p.a13 * p.a21 / (p.a12 * p.a31)
    pivot = ws if variant == WaveLyapunovVariant.CONSISTENT else 1.0

    value = (
        (p.a21 / p.a12) * (x1 - us * np.log(x1))
        + (x2 - vs * np.log(x2))
        + k * (y - ws * np.log(y) - (y - z) * (1.0 - pivot / y))
    )
    rate = (
        -(p.a21 * p.r1 / p.a12) * (x1 - us) ** 2
        - p.r2 * (x2 - vs) ** 2
        - cfg.rho * k * pivot * (y - z) ** 2 / y ** 2
    )
    return value, rate


def wave_lyapunov_gradient(p: ModelParams, s: ProfileLike,
                           variant: WaveLyapunovVariant = WaveLyapunovVariant.CONSISTENT) -> np.ndarray:
    arr = s.as_array() if isinstance(s, ProfileState) else np.asarray(s, dtype=float)
    x1, x2, y, z = _lyapunov_parts(p, arr)
    us, vs, ws = estar_coords(p)
    k = p.a13 * p.a21 / (p.a12 * p.a31)
    if variant == WaveLyapunovVariant.CONSISTENT:
        d_y = -k * ws * (y - z) / y ** 2
        d_z = k * (1.0 - ws / y)
    else:
        d_y = k * (1.0 / y - ws / y - (y - z) / y ** 2)
        d_z = k * (1.0 - 1.0 / y)
    return np.array([(p.a21 / p.a12) * (1.0 - us / x1), 1.0 - vs / x2, d_y, d_z])


# ----------------------------- Search ------------------------------
class _Bracket:
    def __init__(self, lo: float, hi: float, lo_shot: ShotOutcome, hi_shot: ShotOutcome,
                 found: Optional[Tuple[float, ShotOutcome]] = None):
        self.lo, self.hi = lo, hi
        self.lo_shot, self.hi_shot = lo_shot, hi_shot
        self.found = found

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _exit_verdict(shot: ShotOutcome) -> ShotVerdict:
    if shot.verdict == ShotVerdict.EXIT_OTHER:
        raise ShootingError(
            f"orbit left the wedge through a Q face at t={shot.exit_time:g} (state {shot.final.as_array()})"
        )
    return shot.verdict


def _bisect(fire: Callable[[float], ShotOutcome], bracket: _Bracket, tol: float) -> _Bracket:
    lo_verdict = bracket.lo_shot.verdict
    while bracket.found is None:
        mid = 0.5 * (bracket.lo + bracket.hi)
        if bracket.width <= tol or not bracket.lo < mid < bracket.hi:
            break
        shot = fire(mid)
        verdict = _exit_verdict(shot)
        if verdict == lo_verdict:
            bracket.lo, bracket.lo_shot = mid, shot
        elif verdict in (ShotVerdict.EXIT_P1, ShotVerdict.EXIT_P2):
            bracket.hi, bracket.hi_shot = mid, shot
        else:
            bracket.found = (mid, shot)
    logger.debug("bisection bracket [%r, %r] width %.3e", bracket.lo, bracket.hi, bracket.width)
    return bracket


def _leftmost_bracket(zs: np.ndarray, shots: List[ShotOutcome]) -> _Bracket:
    verdicts = [_exit_verdict(s) for s in shots]
    if verdicts[0] == verdicts[-1] and verdicts[0] in (ShotVerdict.EXIT_P1, ShotVerdict.EXIT_P2):
        raise WaveConfigurationError(
            f"both ends of the starting curve exit through {verdicts[0].value}; retry with a smaller eps"
        )
    for i, verdict in enumerate(verdicts):
        if verdict not in (ShotVerdict.EXIT_P1, ShotVerdict.EXIT_P2):
            return _Bracket(zs[i], zs[i], shots[i], shots[i], found=(float(zs[i]), shots[i]))
        if i + 1 < len(verdicts) and verdicts[i + 1] != verdict:
            nxt = verdicts[i + 1]
            if nxt not in (ShotVerdict.EXIT_P1, ShotVerdict.EXIT_P2):
                return _Bracket(zs[i + 1], zs[i + 1], shots[i + 1], shots[i + 1], found=(float(zs[i + 1]), shots[i + 1]))
            return _Bracket(float(zs[i]), float(zs[i + 1]), shots[i], shots[i + 1])
    raise WaveConfigurationError("no change of exit face along the starting curve; retry with a smaller eps")


def _agreement_time(a: ShotOutcome, b: ShotOutcome, tol: float) -> float:
    """Last time up to which the two bracketing orbits stay within tol of each other."""
    if a.dense is None or b.dense is None:
        return 0.0
    t_max = min(a.exit_time or a.times[-1], b.exit_time or b.times[-1])
    if t_max <= 0.0:
        return 0.0
    grid = np.linspace(0.0, t_max, AGREEMENT_SAMPLES)
    gap = np.max(np.abs(a.dense(grid) - b.dense(grid)), axis=0)
    apart = np.nonzero(gap > tol)[0]
    if apart.size == 0:
        return float(t_max)
    return float(grid[apart[0] - 1]) if apart[0] > 0 else 0.0


def _segment(shot: ShotOutcome, until: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    if until is None:
        return shot.times.copy(), shot.states.copy()
    keep = shot.times < until
    times = np.append(shot.times[keep], until)
    end = shot.dense(until) if shot.dense is not None else shot.states[keep][-1]
    states = np.vstack([shot.states[keep], end])
    return times, states


def _truncate_at_convergence(times: np.ndarray, states: np.ndarray, target: np.ndarray,
                             tol: float) -> Tuple[np.ndarray, np.ndarray, bool]:
    close = np.nonzero(np.max(np.abs(states - target), axis=1) <= tol)[0]
    if close.size == 0:
        return times, states, False
    i = int(close[0]) + 1
    return times[:i], states[:i], True


def _segment_lyapunov(p: ModelParams, cfg: WaveConfig, segments: List[np.ndarray],
                      variant: WaveLyapunovVariant) -> LyapunovReport:
    max_increase, worst, passed = 0.0, None, True
    first_value = last_value = 0.0
    offset = 0
    samples = 0
    for n, states in enumerate(segments):
        values, _ = wave_lyapunov(p, cfg, states.T, variant)
        values = np.atleast_1d(values)
        if n == 0:
            first_value = float(values[0])
        last_value = float(values[-1])
        samples += values.size
        increments = np.diff(values)
        if increments.size:
            allowed = LYAPUNOV_REL_TOL * (1.0 + np.abs(values[:-1]))
            passed = passed and bool(np.all(increments <= allowed))
            i = int(np.argmax(increments))
            if increments[i] > max_increase:
                max_increase, worst = float(increments[i]), offset + i + 1
        offset += values.size
    return LyapunovReport(
        function="L",
        variant=variant.value,
        samples=samples,
        max_increase=max_increase,
        worst_index=worst,
        initial_value=first_value,
        final_value=last_value,
        passed=passed,
    )


def find_wave(p: ModelParams, cfg: WaveConfig, eps: float = 0.01, z_tol: float = 1e-15,
              horizon: float = DEFAULT_HORIZON, converge_tol: float = 1e-5,
              variant: WaveLyapunovVariant = WaveLyapunovVariant.CONSISTENT,
              max_stages: int = MAX_STAGES) -> WaveResult:
    """Shoot for the E1 -> E* connection at speed cfg.c.

    Certified iff the last 20% (in time) of the assembled orbit lies within
    1e-3 of the E* lift and L is nonincreasing along every stage.
    """
    spectrum = unstable_spectrum(p, cfg)
    if cfg.subcritical or spectrum.degenerate:
        raise SubcriticalWaveError(cfg.c, cfg.c_star, spectrum.lambda2, spectrum.lambda3)
    target = estar_lift(p)
    if not 0.0 < eps <= EPS_MAX:
        raise WaveConfigurationError(f"eps={eps:g} is outside (0, {EPS_MAX:g}]; retry with a smaller eps")

    s1, s2 = cfg.sigma1, cfg.sigma2
    logger.info("Shooting for a wave at c=%g (c_star=%.6f, sigma1=%.6f, sigma2=%.6f)", cfg.c, cfg.c_star, s1, s2)

    def fire_curve(z: float) -> ShotOutcome:
        return shoot(p, cfg, gamma_point(p, cfg, eps, z), horizon, converge_tol, dense=True)

    zs = np.linspace(s1 * eps, s2 * eps, SCAN_SAMPLES)
    bracket = _bisect(fire_curve, _leftmost_bracket(zs, [fire_curve(z) for z in zs]), z_tol)
    z_star = bracket.found[0] if bracket.found else 0.5 * (bracket.lo + bracket.hi)
    width = 0.0 if bracket.found else bracket.width

    segments: List[np.ndarray] = []
    seg_times: List[np.ndarray] = []
    elapsed = 0.0
    stages = 1
    max_jump = 0.0
    reason = ""

    while True:
        if bracket.found is not None:
            times, states = _segment(bracket.found[1], None)
            times, states, hit = _truncate_at_convergence(times, states, target, converge_tol)
            segments.append(states)
            seg_times.append(times + elapsed)
            elapsed += times[-1]
            reason = "converged" if hit else "stayed to horizon"
            break

        restart = _agreement_time(bracket.lo_shot, bracket.hi_shot, RESTART_TOL)
        times, states = _segment(bracket.lo_shot, restart)
        times, states, hit = _truncate_at_convergence(times, states, target, converge_tol)
        segments.append(states)
        seg_times.append(times + elapsed)
        elapsed += times[-1]
        if hit:
            reason = "converged"
            break
        if elapsed >= horizon:
            reason = "stayed to horizon"
            break
        if restart <= 0.0:
            raise ShootingError(f"stage {stages} made no progress (bracket width {bracket.width:.3e})")
        if stages >= max_stages:
            reason = f"stopped after {max_stages} stages"
            break

        x1, x2, y, z0 = states[-1]
        stages += 1
        remaining = horizon - elapsed

        def fire_fiber(z: float, x1=x1, x2=x2, y=y) -> ShotOutcome:
            return shoot(p, cfg, np.array([x1, x2, y, z]), remaining, converge_tol, dense=True)

        bracket = _bisect(fire_fiber, _fiber_bracket(fire_fiber, s1 * y, s2 * y, z0), z_tol * max(1.0, y / eps))
        z_new = bracket.found[0] if bracket.found else 0.5 * (bracket.lo + bracket.hi)
        max_jump = max(max_jump, abs(z_new - z0))
        logger.debug("stage %d restarts at t=%.4f, Z corrected by %.3e", stages, elapsed, z_new - z0)

    starts, total = [], 0
    for states in segments:
        starts.append(total)
        total += states.shape[0]
    all_times = np.concatenate(seg_times)
    all_states = np.vstack(segments)

    distance = np.max(np.abs(all_states - target), axis=1)
    tail = all_times >= all_times[-1] - TAIL_WINDOW * (all_times[-1] - all_times[0])
    tail_distance = float(distance[tail].max())
    lyapunov = _segment_lyapunov(p, cfg, segments, variant)
    certified = tail_distance <= TAIL_TOL and lyapunov.passed
    if not certified:
        reason = (reason + "; " if reason else "") + (
            f"tail distance {tail_distance:.3e} exceeds {TAIL_TOL:g}" if tail_distance > TAIL_TOL else "L increased"
        )

    logger.info("Wave c=%g: certified=%s after %d stages (%s)", cfg.c, certified, stages, reason)
    return WaveResult(
        config=cfg,
        eps=eps,
        z_star=float(z_star),
        bracket_width=float(width),
        stages=stages,
        max_jump=float(max_jump),
        times=all_times,
        states=all_states,
        segment_starts=starts,
        tail_distance=tail_distance,
        final_distance=float(distance[-1]),
        lyapunov=lyapunov,
        certified=bool(certified),
        reason=reason,
    )


def _fiber_bracket(fire: Callable[[float], ShotOutcome], z_min: float, z_max: float, z0: float) -> _Bracket:
    """Smallest bracket around z0 (growing tenfold up to the whole segment) whose ends exit differently."""
    delta = 10.0 * RESTART_TOL
    while True:
        lo, hi = max(z_min, z0 - delta), min(z_max, z0 + delta)
        lo_shot, hi_shot = fire(lo), fire(hi)
        lo_v, hi_v = _exit_verdict(lo_shot), _exit_verdict(hi_shot)
        exits = (ShotVerdict.EXIT_P1, ShotVerdict.EXIT_P2)
        if lo_v not in exits:
            return _Bracket(lo, lo, lo_shot, lo_shot, found=(lo, lo_shot))
        if hi_v not in exits:
            return _Bracket(hi, hi, hi_shot, hi_shot, found=(hi, hi_shot))
        if lo_v != hi_v:
            return _Bracket(lo, hi, lo_shot, hi_shot)
        if lo == z_min and hi == z_max:
            raise ShootingError(f"both ends of the Z segment [{z_min:g}, {z_max:g}] exit through {lo_v.value}")
        delta *= 10.0
