from __future__ import annotations

import logging
from typing import Iterable, List, Optional

import numpy as np
from scipy.integrate import RK45, OdeSolution

from models.equilibrium import Equilibrium, LyapunovVariant
from models.params import ModelParams
from models.trajectory import (
    BoundsReport,
    ConvergenceHit,
    IntegratorOptions,
    LyapunovReport,
    Trajectory,
    TrajectoryEvent,
)
from services.equilibria import compute_equilibria, lyapunov_V12, lyapunov_Vstar
from services.errors import DomainError, InsufficientDataError, PreconditionError, StiffnessError
from services.model_core import StateLike, reaction_terms, state_array

logger = logging.getLogger(__name__)

NEGATIVE_FLOOR = -1e-9
MIN_STEP = 1e-12
BOUNDS_SLACK = 1e-3
LYAPUNOV_REL_TOL = 1e-7


def _new_solver(p: ModelParams, t0: float, y0: np.ndarray, t_end: float, opts: IntegratorOptions,
                first_step: float, max_step: float) -> RK45:
    return RK45(
        lambda t, y: reaction_terms(p, y),
        t0,
        y0,
        t_end,
        rtol=opts.rtol,
        atol=opts.atol,
        first_step=min(first_step, t_end - t0),
        max_step=max_step,
    )


def _assemble(times: List[float], states: List[np.ndarray], events: List[TrajectoryEvent],
              interpolants: list) -> Trajectory:
    dense = OdeSolution(np.array(times), interpolants) if interpolants else None
    return Trajectory(times=times, states=np.array(states), events=events, dense=dense)


def integrate(p: ModelParams, init: StateLike, t_end: float, opts: Optional[IntegratorOptions] = None) -> Trajectory:
    """Dormand-Prince 5(4) integration of the kinetic system with dense output.

    Steps that undershoot below -1e-9 are redone from the last accepted state
    with half the step; smaller negative values are clamped to 0 and logged
    as 'clamp' events. The first entry into the 'proximity_eps' neighbourhood
    of each existing equilibrium is logged as a 'near:<name>' event.
    """
    opts = opts or IntegratorOptions()
    y0 = state_array(init)
    if y0.shape != (3,):
        raise PreconditionError(f"init must be a single state, got shape {y0.shape}")
    if np.any(y0 < 0.0):
        raise PreconditionError(f"init must be nonnegative, got {y0}")
    if not t_end > 0:
        raise PreconditionError(f"t_end must be positive, got {t_end}")

    max_step = opts.max_step or t_end / 100.0
    targets = [e for e in compute_equilibria(p) if e.exists]
    seen: set = set()

    times: List[float] = [0.0]
    states: List[np.ndarray] = [y0.copy()]
    events: List[TrajectoryEvent] = []
    interpolants: list = []

    def note_proximity(t: float, y: np.ndarray) -> None:
        for e in targets:
            if e.name in seen:
                continue
            if np.max(np.abs(y - e.coords.as_array())) <= opts.proximity_eps:
                seen.add(e.name)
                events.append(TrajectoryEvent(time=t, tag=f"near:{e.name.value}", detail=f"eps={opts.proximity_eps:g}"))

    note_proximity(0.0, y0)
    t, y = 0.0, y0
    solver = _new_solver(p, t, y, t_end, opts, opts.first_step, max_step)

    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"integration stalled at t={t:g}: {message}", partial=_assemble(times, states, events, interpolants))

        y_new = solver.y
        if not np.all(np.isfinite(y_new)):
            raise StiffnessError(f"non-finite state after t={t:g}", partial=_assemble(times, states, events, interpolants))

        if np.any(y_new < NEGATIVE_FLOOR):
            half = 0.5 * (solver.t - t)
            if half < MIN_STEP:
                raise StiffnessError(
                    f"step size underflow at t={t:g} while keeping densities nonnegative",
                    partial=_assemble(times, states, events, interpolants),
                )
            logger.debug("Rejecting step to t=%g (min component %.3e); retrying with h=%g", solver.t, y_new.min(), half)
            solver = _new_solver(p, t, y, t_end, opts, half, max_step)
            continue

        interpolants.append(solver.dense_output())
        t_new = solver.t
        if np.any(y_new < 0.0):
            clamped = np.maximum(y_new, 0.0)
            events.append(TrajectoryEvent(time=t_new, tag="clamp", detail=f"min={y_new.min():.3e}"))
            times.append(t_new)
            states.append(clamped)
            t, y = t_new, clamped
            note_proximity(t, y)
            if t < t_end:
                solver = _new_solver(p, t, y, t_end, opts, max(solver.step_size or opts.first_step, MIN_STEP), max_step)
            continue

        times.append(t_new)
        states.append(y_new.copy())
        t, y = t_new, y_new.copy()
        note_proximity(t, y)

    return _assemble(times, states, events, interpolants)


def random_positive_states(rng: np.random.Generator, n: int, low: float = 0.05, high: float = 1.5) -> np.ndarray:
    """n initial conditions drawn uniformly from [low, high)^3; shape (n, 3)."""
    return rng.uniform(low, high, size=(n, 3))


def _tail_mask(traj: Trajectory, window: float) -> np.ndarray:
    t0, t1 = traj.times[0], traj.times[-1]
    return traj.times >= t1 - window * (t1 - t0)


def check_bounds(traj: Trajectory, p: ModelParams, window: float = 0.2) -> BoundsReport:
    """Tail suprema against u <= 1, v <= 1 + a21/r2 and u + (a13/a31) w <= (r1+mu)/mu."""
    if len(traj) < 10:
        raise InsufficientDataError(f"need at least 10 samples, got {len(traj)}")
    tail = traj.states[_tail_mask(traj, window)]
    u, v, w = tail[:, 0], tail[:, 1], tail[:, 2]
    M, D = p.r1 + p.mu, p.mu
    u_sup = float(u.max())
    v_sup = float(v.max())
    combined = float(np.max(u + (p.a13 / p.a31) * w))
    v_bound = 1.0 + p.a21 / p.r2
    return BoundsReport(
        u_sup_tail=u_sup,
        v_sup_tail=v_sup,
        combined_tail=combined,
        M=M,
        D=D,
        v_bound=v_bound,
        combined_bound=M / D,
        slack=BOUNDS_SLACK,
        window=window,
        u_ok=u_sup <= 1.0 + BOUNDS_SLACK,
        v_ok=v_sup <= v_bound + BOUNDS_SLACK,
        combined_ok=combined <= M / D + BOUNDS_SLACK,
    )


def detect_convergence(traj: Trajectory, targets: Iterable[Equilibrium], eps: float) -> Optional[ConvergenceHit]:
    """Earliest sample time after which the trajectory stays within eps (sup norm) of a target."""
    if not eps > 0:
        raise PreconditionError(f"eps must be positive, got {eps}")
    best: Optional[ConvergenceHit] = None
    for e in targets:
        if not e.exists:
            continue
        dist = np.max(np.abs(traj.states - e.coords.as_array()), axis=1)
        suffix_max = np.maximum.accumulate(dist[::-1])[::-1]
        inside = np.nonzero(suffix_max <= eps)[0]
        if inside.size == 0:
            continue
        hit = ConvergenceHit(name=e.name.value, time=float(traj.times[inside[0]]))
        if best is None or hit.time < best.time:
            best = hit
    return best


def _monotonicity(values: np.ndarray, function: str, variant: Optional[str]) -> LyapunovReport:
    increments = np.diff(values)
    allowed = LYAPUNOV_REL_TOL * (1.0 + np.abs(values[:-1]))
    worst = None
    max_increase = 0.0
    if increments.size and increments.max() > 0.0:
        worst = int(np.argmax(increments)) + 1
        max_increase = float(increments.max())
    return LyapunovReport(
        function=function,
        variant=variant,
        samples=int(values.size),
        max_increase=max_increase,
        worst_index=worst,
        initial_value=float(values[0]),
        final_value=float(values[-1]),
        passed=bool(np.all(increments <= allowed)),
    )


def monitor_lyapunov(traj: Trajectory, which: str, p: ModelParams,
                     variant: LyapunovVariant = LyapunovVariant.CONSISTENT) -> LyapunovReport:
    """Largest increase of V between consecutive samples; passes iff every step rises at most 1e-7(1+|V|)."""
    if which == "V12":
        needs = (0, 1)
    elif which == "Vstar":
        needs = (0, 1, 2)
    else:
        raise ValueError(f"unknown Lyapunov function: {which}")

    bad = np.nonzero(np.any(traj.states[:, needs] <= 0.0, axis=1))[0]
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"{which} undefined at sample {i} (t={traj.times[i]:g}, state={traj.states[i]})")
    if which == "V12" and np.any(traj.states[:, 2] < 0.0):
        i = int(np.nonzero(traj.states[:, 2] < 0.0)[0][0])
        raise DomainError(f"V12 undefined at sample {i} (t={traj.times[i]:g}): w < 0")

    y = traj.states.T
    if which == "V12":
        values = np.asarray(lyapunov_V12(p, y))
        return _monotonicity(values, which, None)
    values = np.asarray(lyapunov_Vstar(p, y, variant))
    return _monotonicity(values, which, variant.value)
