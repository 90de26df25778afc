from __future__ import annotations

import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import factorized
from scipy.stats import linregress

from models.field import (
    Field1D,
    FrontTrace,
    Grid1D,
    Scenario2Check,
    SpaceTimeRecord,
    SweepPoint,
    SweepResult,
)
from models.params import ModelParams
from services.equilibria import e13_coords, estar_coords
from services.errors import InsufficientTraceError, PreconditionError, StepSizeError
from services.model_core import reaction_terms

logger = logging.getLogger(__name__)

CFL_FACTOR = 0.4
MAX_DT = 0.05
SPLIT_DT = 0.01
CLAMP_FLOOR = 1e-12
CLAMP_BUDGET = 1e-3
MODES = ("explicit", "split")


# -------------------------- Initial data ---------------------------
def _indicator(grid: Grid1D, a: float, b: float) -> np.ndarray:
    x = grid.centers
    return (x >= a) & (x <= b)


def make_scenario(scenario: int, grid: Grid1D) -> Field1D:
    """Initial profiles of the three reference cases on [0, L].

    Interval ends are fractions of L, so L = 10 gives [4.8, 5.2], [0, 5] and
    [5, 10]. A cell belongs to an interval when its midpoint does.
    """
    L = grid.length
    n = grid.n_cells
    if scenario == 1:
        u = np.full(n, 0.2)
        v = np.full(n, 0.1)
        w = np.where(_indicator(grid, 0.48 * L, 0.52 * L), 0.08, 0.0)
    elif scenario == 2:
        u = np.ones(n)
        v = np.where(_indicator(grid, 0.0, 0.5 * L), 0.1, 0.0)
        w = np.where(_indicator(grid, 0.5 * L, L), 0.1, 0.0)
    elif scenario == 3:
        u = np.where(_indicator(grid, 0.0, 0.5 * L), 0.15, 0.0)
        v = np.ones(n)
        w = np.where(_indicator(grid, 0.0, 0.5 * L), 0.1, 0.0)
    else:
        raise PreconditionError(f"unknown scenario {scenario!r}; expected 1, 2 or 3")
    return Field1D(grid=grid, u=u, v=v, w=w)


def make_invasion(grid: Grid1D, w_width: Optional[float] = None, w_level: float = 0.1) -> Field1D:
    """w invading a prey-saturated, v-free habitat from the left end."""
    width = grid.length / 20.0 if w_width is None else w_width
    n = grid.n_cells
    w = np.where(_indicator(grid, 0.0, width), w_level, 0.0)
    return Field1D(grid=grid, u=np.ones(n), v=np.zeros(n), w=w)


def parse_profile(text: str, grid: Grid1D) -> np.ndarray:
    """Piecewise-constant profile from 'a:b:value; a:b:value' (later pieces win)."""
    values = np.zeros(grid.n_cells)
    for piece in filter(None, (part.strip() for part in text.split(";"))):
        try:
            a, b, value = (float(x) for x in piece.split(":"))
        except ValueError as err:
            raise PreconditionError(f"bad profile piece {piece!r}; expected a:b:value") from err
        if value < 0:
            raise PreconditionError(f"profile value must be nonnegative in {piece!r}")
        values[_indicator(grid, a, b)] = value
    return values


def make_custom(grid: Grid1D, profiles: Dict[str, str]) -> Field1D:
    arrays = {name: parse_profile(profiles.get(name, ""), grid) for name in ("u", "v", "w")}
    return Field1D(grid=grid, **arrays)


# --------------------------- Stepping ------------------------------
def stable_dt(grid: Grid1D, d: float) -> float:
    return min(CFL_FACTOR * grid.dx ** 2 / d, MAX_DT)


def laplacian(w: np.ndarray, dx: float) -> np.ndarray:
    """Second difference with zero-flux ghost cells."""
    padded = np.concatenate(([w[0]], w, [w[-1]]))
    return (padded[:-2] - 2.0 * w + padded[2:]) / (dx * dx)


def _mol_rhs(p: ModelParams, y: np.ndarray, dx: float, reactions: bool) -> np.ndarray:
    out = reaction_terms(p, y) if reactions else np.zeros_like(y)
    out[2] += p.d * laplacian(y[2], dx)
    return out


def _rk4(f, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _diffusion_solver(n: int, r: float) -> Callable[[np.ndarray], np.ndarray]:
    """Factorized backward-Euler operator I - r * (Neumann second difference)."""
    main = np.full(n, 1.0 + 2.0 * r)
    main[0] = main[-1] = 1.0 + r
    off = np.full(n - 1, -r)
    A = sparse.diags([main, off, off], offsets=[0, -1, 1], format="csc")
    return factorized(A)


def _clamp(y: np.ndarray) -> Tuple[np.ndarray, int]:
    count = int(np.count_nonzero(y < -CLAMP_FLOOR))
    return np.maximum(y, 0.0), count


def _advance(p: ModelParams, y: np.ndarray, grid: Grid1D, dt: float, mode: str, reactions: bool,
             implicit: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> Tuple[np.ndarray, int]:
    dx = grid.dx
    if mode == "explicit":
        y_new = _rk4(lambda s: _mol_rhs(p, s, dx, reactions), y, dt)
    else:
        y_new = _rk4(lambda s: reaction_terms(p, s), y, dt) if reactions else y.copy()
        if implicit is None:
            implicit = _diffusion_solver(grid.n_cells, p.d * dt / (dx * dx))
        y_new[2] = implicit(y_new[2])
    return _clamp(y_new)


def _check_step(p: ModelParams, grid: Grid1D, dt: float, mode: str) -> None:
    if mode not in MODES:
        raise PreconditionError(f"unknown time-stepping mode {mode!r}; expected one of {MODES}")
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    if mode == "explicit":
        bound = CFL_FACTOR * grid.dx ** 2 / p.d
        if dt > bound * (1.0 + 1e-12):
            raise StepSizeError(f"dt={dt:g} exceeds the explicit diffusion bound 0.4*dx^2/d={bound:g}")


def step(p: ModelParams, f: Field1D, dt: float, mode: str = "explicit", reactions: bool = True) -> Field1D:
    """Advance one step; only w diffuses. Values below -1e-12 are counted and all negatives reset to 0."""
    _check_step(p, f.grid, dt, mode)
    y, clamped = _advance(p, f.stacked(), f.grid, dt, mode, reactions)
    return Field1D(grid=f.grid, u=y[0], v=y[1], w=y[2], time=f.time + dt, clamped=clamped)


def run(p: ModelParams, f0: Field1D, t_end: float, output_every: float, dt: Optional[float] = None,
        mode: str = "explicit", reactions: bool = True) -> SpaceTimeRecord:
    """Integrate to t_end, keeping a snapshot every `output_every` time units plus the terminal one."""
    if not t_end > 0:
        raise PreconditionError(f"t_end must be positive, got {t_end}")
    if not output_every > 0:
        raise PreconditionError(f"output_every must be positive, got {output_every}")
    grid = f0.grid
    if dt is None:
        dt = stable_dt(grid, p.d) if mode == "explicit" else SPLIT_DT
    n_steps = max(1, math.ceil(t_end / dt - 1e-9))
    dt = t_end / n_steps
    _check_step(p, grid, dt, mode)
    every = max(1, round(output_every / dt))
    implicit = _diffusion_solver(grid.n_cells, p.d * dt / grid.dx ** 2) if mode == "split" else None

    logger.info("PDE run: %d cells, dt=%g (%s), %d steps to t=%g, d=%g", grid.n_cells, dt, mode, n_steps, t_end, p.d)
    y = f0.stacked()
    times: List[float] = [f0.time]
    snaps: List[np.ndarray] = [y.copy()]
    clamps = 0
    for k in range(1, n_steps + 1):
        y, clamped = _advance(p, y, grid, dt, mode, reactions, implicit)
        clamps += clamped
        if k % every == 0 or k == n_steps:
            times.append(f0.time + k * dt)
            snaps.append(y.copy())

    cell_steps = 3 * grid.n_cells * n_steps
    if clamps > CLAMP_BUDGET * cell_steps:
        logger.warning("Clamped %d of %d cell-steps (budget %.1f%%)", clamps, cell_steps, 100 * CLAMP_BUDGET)
    elif clamps:
        logger.debug("Clamped %d negative values", clamps)

    stack = np.array(snaps)
    return SpaceTimeRecord(
        grid=grid,
        times=np.array(times),
        u=stack[:, 0, :],
        v=stack[:, 1, :],
        w=stack[:, 2, :],
        dt=dt,
        mode=mode,
        clamp_count=clamps,
        cell_steps=cell_steps,
    )


# ------------------------- Front tracking --------------------------
def _crossing(w: np.ndarray, x: np.ndarray, theta: float, direction: str) -> Optional[float]:
    above = w >= theta
    if not above.any() or above.all():
        return None
    if direction == "right":
        i = int(np.nonzero(above)[0][-1])
        if i == w.size - 1:
            return None
        j = i + 1
    else:
        j = int(np.nonzero(above)[0][0])
        if j == 0:
            return None
        i = j - 1
    frac = (w[i] - theta) / (w[i] - w[j])
    return float(x[i] + frac * (x[j] - x[i]))


def front_speed(record: SpaceTimeRecord, theta: float = 0.05, direction: str = "right",
                exclude_fraction: float = 0.1) -> FrontTrace:
    """Linear fit of the theta-level crossing of w over the last half of the trace.

    direction='right' follows the rightmost crossing, 'left' the leftmost.
    Positions within `exclude_fraction` of the far boundary are dropped.
    """
    if direction not in ("right", "left"):
        raise PreconditionError(f"direction must be 'right' or 'left', got {direction!r}")
    grid = record.grid
    x = grid.centers
    L = grid.length
    times, positions = [], []
    for t, w in zip(record.times, record.w):
        pos = _crossing(w, x, theta, direction)
        if pos is None:
            continue
        if direction == "right" and pos > (1.0 - exclude_fraction) * L:
            continue
        if direction == "left" and pos < exclude_fraction * L:
            continue
        times.append(t)
        positions.append(pos)

    if len(times) < 4:
        raise InsufficientTraceError(
            f"front at theta={theta:g} found in only {len(times)} snapshots; it never formed or reached the boundary too fast"
        )
    times_arr, pos_arr = np.array(times), np.array(positions)
    half = times_arr.size // 2
    fit = linregress(times_arr[half:], pos_arr[half:])
    speed = fit.slope if direction == "right" else -fit.slope
    traversal = float((pos_arr.max() - pos_arr.min()) / L)
    if traversal < 0.25:
        logger.warning("Front at theta=%g covered only %.0f%% of the domain", theta, 100 * traversal)
    return FrontTrace(
        times=times_arr,
        positions=pos_arr,
        theta=theta,
        direction=direction,
        speed=float(speed),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue ** 2),
        traversal=traversal,
    )


# ---------------------- Exploratory checks -------------------------
def scenario2_check(record: SpaceTimeRecord, p: ModelParams, tolerance: float = 2e-2) -> Scenario2Check:
    """Terminal field vs E* on the outer quarter of the left half and E13 on the outer quarter of the right.

    Never raises on disagreement; logs a warning instead.
    """
    grid = record.grid
    x = grid.centers
    L = grid.length
    final = record.terminal.stacked()
    left = final[:, x <= 0.25 * L]
    right = final[:, x >= 0.75 * L]

    estar = np.array(estar_coords(p))[:, None]
    left_dev = float(np.max(np.abs(left - estar)))
    right_dev = None
    if p.a31 > p.mu:
        u13, w13 = e13_coords(p)
        right_dev = float(np.max(np.abs(right - np.array([u13, 0.0, w13])[:, None])))

    check = Scenario2Check(
        left_deviation=left_dev,
        right_deviation=right_dev,
        tolerance=tolerance,
        left_ok=left_dev <= tolerance,
        right_ok=right_dev is not None and right_dev <= tolerance,
    )
    if not (check.left_ok and check.right_ok):
        logger.warning(
            "Scenario 2 check did not hold: left deviation from E* %.3e, right deviation from E13 %s (tolerance %g)",
            left_dev, "n/a" if right_dev is None else f"{right_dev:.3e}", tolerance,
        )
    return check


def diffusion_sweep(p: ModelParams, grid: Grid1D, ds: Iterable[float], t_end: float,
                    scenario: int = 3, mode: str = "split") -> SweepResult:
    """Right-half mean of w at t_end for each diffusion coefficient."""
    points = []
    right = grid.centers >= 0.5 * grid.length
    for d in ds:
        params = p.replace(d=d)
        record = run(params, make_scenario(scenario, grid), t_end, output_every=t_end, mode=mode)
        mean_w = float(record.w[-1][right].mean())
        logger.info("d=%g: right-half mean w=%.6g", d, mean_w)
        points.append(SweepPoint(d=d, right_mean_w=mean_w))
    return SweepResult(points=points)
