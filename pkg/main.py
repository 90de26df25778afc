from __future__ import annotations

from dotenv import load_dotenv
load_dotenv()  # Must be first so env is available during imports

import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import numpy as np

from models.equilibrium import LyapunovVariant, Regime
from models.field import Grid1D
from models.run_config import RunConfig
from models.trajectory import IntegratorOptions, Trajectory
from services import plotting
from services.config_loader import load_run_config, parse_assignment
from services.equilibria import analyze, compute_equilibria, regime
from services.errors import (
    DomainError,
    InsufficientTraceError,
    PredPreyError,
    ShootingError,
    StepSizeError,
    StiffnessError,
    SubcriticalWaveError,
)
from services.ode_integrator import (
    check_bounds,
    detect_convergence,
    integrate,
    monitor_lyapunov,
    random_positive_states,
)
from services.pde_simulator import (
    diffusion_sweep,
    front_speed,
    make_custom,
    make_invasion,
    make_scenario,
    run,
    scenario2_check,
)
from services.wave_shooter import find_wave, wave_config
from settings import APP_NAME, LOG_FORMAT, __version__, load_settings_from_env
from storage.run_store import RunOutputStore

logger = logging.getLogger(APP_NAME)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_SUBCRITICAL = 3
NUMERICAL_ERRORS = (StiffnessError, StepSizeError, ShootingError, InsufficientTraceError)
EXTINCTION_LEVEL = 1e-5


class PredPreyCLI(click.Group):
    """Click group that maps every failure onto the documented exit codes."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = rv if isinstance(rv, int) else EXIT_OK
        except click.ClickException as exc:
            exc.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_USAGE
        except SubcriticalWaveError as exc:
            click.echo(f"ERROR: {exc}", err=True)
            code = EXIT_SUBCRITICAL
        except NUMERICAL_ERRORS as exc:
            click.echo(f"ERROR: {exc}", err=True)
            code = EXIT_NUMERICAL
        except (PredPreyError, RuntimeError) as exc:
            click.echo(f"ERROR: {exc}", err=True)
            code = EXIT_USAGE
        if standalone_mode:
            sys.exit(code)
        return code


# ------------------------- Shared plumbing ---------------------------
def run_options(func):
    """--config / --set / --output-dir, shared by every command."""
    func = click.option("--output-dir", type=click.Path(file_okay=False), default=None,
                        help="Run directory (overrides output.dir).")(func)
    func = click.option("--set", "assignments", multiple=True, metavar="KEY=VALUE",
                        help="Override one config key; repeatable.")(func)
    func = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                        help="Flat key=value run config.")(func)
    return func


def resolve(config_path: Optional[str], assignments: Tuple[str, ...], flags: Dict[str, Any]) -> RunConfig:
    """File < --set < named flags."""
    overrides: Dict[str, Any] = dict(parse_assignment(a) for a in assignments)
    overrides.update({key: value for key, value in flags.items() if value is not None})
    return load_run_config(config_path, overrides)


def open_store(cfg: RunConfig, command: str, output_dir: Optional[str]) -> RunOutputStore:
    run_dir = output_dir or cfg.output.dir
    if run_dir is None:
        run_dir = Path(load_settings_from_env()["output_dir"]) / command
    store = RunOutputStore(run_dir=run_dir, command=command)
    store.open()
    store.write_provenance(cfg, command)
    return store


# ------------------------------ CLI ----------------------------------
@click.group(cls=PredPreyCLI)
@click.version_option(__version__, prog_name=APP_NAME)
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              default=None, help="Console log level (default: PREDPREY_LOG_LEVEL or INFO).")
def cli(log_level: Optional[str]) -> None:
    """Three-species predator-prey model: equilibria, ODE and PDE runs, traveling waves."""
    level = (log_level or load_settings_from_env()["log_level"]).upper()
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


@cli.command("analyze")
@run_options
@click.option("--samples", type=click.IntRange(min=1), default=100, show_default=True,
              help="Random states per Lyapunov closed-form audit.")
def cmd_analyze(config_path, assignments, output_dir, samples) -> int:
    """Equilibria, eigenvalues, verdicts, regime and assumption report."""
    cfg = resolve(config_path, assignments, {})
    with open_store(cfg, "analyze", output_dir) as store:
        report = analyze(cfg.params, np.random.default_rng(cfg.seed), samples)
        store.write_json("analysis.json", report)

    click.echo(f"regime: {report.regime.regime.value} ({report.regime.witness})")
    for e in report.equilibria:
        coords = ", ".join(f"{x:.6g}" for x in e.coords.as_array())
        verdict = e.verdict.value if e.verdict else "-"
        click.echo(f"{e.name.value:>5}  exists={str(e.exists):<5}  ({coords})  {verdict}")
    return EXIT_OK


def _lyapunov_summary(traj: Trajectory, cfg: RunConfig) -> Optional[Dict[str, Any]]:
    which = {Regime.ESTAR_GAS: "Vstar", Regime.E12_GAS: "V12"}.get(regime(cfg.params).regime)
    if which is None:
        return None
    try:
        report = monitor_lyapunov(traj, which, cfg.params, LyapunovVariant.CONSISTENT)
    except DomainError as exc:
        logger.info("Lyapunov monitor skipped: %s", exc)
        return {"function": which, "skipped": str(exc)}
    if not report.passed:
        logger.warning("%s increased by %.3e at sample %s", which, report.max_increase, report.worst_index)
    return report.model_dump(mode="json")


@cli.command("ode")
@run_options
@click.option("--t-end", type=float, default=None, help="Final time (ode.t_end).")
@click.option("--u0", type=float, default=None)
@click.option("--v0", type=float, default=None)
@click.option("--w0", type=float, default=None)
@click.option("--random-starts", type=int, default=None, help="Seeded random starts for batch.csv.")
def cmd_ode(config_path, assignments, output_dir, t_end, u0, v0, w0, random_starts) -> int:
    """Integrate the kinetic system; trajectory CSV plus convergence summary."""
    cfg = resolve(config_path, assignments, {
        "ode.t_end": t_end, "ode.u0": u0, "ode.v0": v0, "ode.w0": w0, "ode.random_starts": random_starts,
    })
    p, section = cfg.params, cfg.ode
    opts = IntegratorOptions(rtol=section.rtol, atol=section.atol)
    targets = [e for e in compute_equilibria(p) if e.exists]

    with open_store(cfg, "ode", output_dir) as store:
        try:
            traj = integrate(p, [section.u0, section.v0, section.w0], section.t_end, opts)
        except StiffnessError as exc:
            if exc.partial is not None:
                store.write_trajectory(exc.partial, "trajectory.partial.csv")
            raise
        store.write_trajectory(traj)

        hit = detect_convergence(traj, targets, section.eps)
        final = traj.states[-1]
        summary: Dict[str, Any] = {
            "regime": regime(p).regime.value,
            "converged_to": hit.name if hit else None,
            "convergence_time": hit.time if hit else None,
            "eps": section.eps,
            "final": {"u": float(final[0]), "v": float(final[1]), "w": float(final[2])},
            "extinct": [name for name, x in zip("uvw", final) if x < EXTINCTION_LEVEL],
            "events": [e.model_dump() for e in traj.events],
            "lyapunov": _lyapunov_summary(traj, cfg),
        }
        if len(traj) >= 10:
            summary["bounds"] = check_bounds(traj, p).model_dump()

        if section.random_starts:
            rows: List[Dict[str, Any]] = []
            for start in random_positive_states(np.random.default_rng(cfg.seed), section.random_starts):
                batch_hit = detect_convergence(integrate(p, start, section.t_end, opts), targets, section.eps)
                rows.append({"u0": start[0], "v0": start[1], "w0": start[2],
                             "converged_to": batch_hit.name if batch_hit else None,
                             "time": batch_hit.time if batch_hit else None})
            store.write_batch(rows)
            summary["batch_converged"] = sum(1 for r in rows if r["converged_to"] == summary["converged_to"])

        store.write_json("summary.json", summary)
        if cfg.output.svg:
            store.write_svg("trajectory.svg", plotting.trajectory_svg(traj))

    if hit:
        click.echo(f"converged to {hit.name} at t={hit.time:.6g} (eps={section.eps:g})")
    else:
        click.echo(f"no convergence within eps={section.eps:g} by t={section.t_end:g}")
    if summary["extinct"]:
        click.echo(f"extinct at t_end: {', '.join(summary['extinct'])}")
    return EXIT_OK


@cli.command("pde")
@run_options
@click.option("--scenario", type=click.Choice(["1", "2", "3", "invasion", "custom"]), default=None)
@click.option("--n-cells", type=int, default=None)
@click.option("--length", type=float, default=None)
@click.option("--t-end", type=float, default=None)
@click.option("--mode", type=click.Choice(["explicit", "split"]), default=None)
@click.option("--front-speed/--no-front-speed", "track_front", default=None, help="Fit the w front speed.")
@click.option("--theta", type=float, default=None, help="Level used for front tracking.")
def cmd_pde(config_path, assignments, output_dir, scenario, n_cells, length, t_end, mode, track_front, theta) -> int:
    """Reaction-diffusion run; space-time CSVs and SVG heatmaps."""
    cfg = resolve(config_path, assignments, {
        "pde.scenario": scenario, "pde.n_cells": n_cells, "pde.length": length, "pde.t_end": t_end,
        "pde.mode": mode, "pde.front_speed": track_front, "pde.theta": theta,
    })
    p, section = cfg.params, cfg.pde
    grid = Grid1D(length=section.length, n_cells=section.n_cells)
    if section.scenario == "invasion":
        f0 = make_invasion(grid)
    elif section.scenario == "custom":
        f0 = make_custom(grid, {"u": section.profile_u, "v": section.profile_v, "w": section.profile_w})
    else:
        f0 = make_scenario(int(section.scenario), grid)

    with open_store(cfg, "pde", output_dir) as store:
        record = run(p, f0, section.t_end, section.output_every, section.dt, section.mode)
        store.write_space_time(record)
        if cfg.output.svg:
            for species in ("u", "v", "w"):
                store.write_svg(f"{species}.svg", plotting.heatmap_svg(record, species))
            store.write_svg("initial.svg", plotting.initial_profiles_svg(record))

        summary: Dict[str, Any] = {
            "scenario": section.scenario,
            "dt": record.dt,
            "mode": record.mode,
            "snapshots": int(record.times.size),
            "clamp_count": record.clamp_count,
            "cell_steps": record.cell_steps,
        }
        if section.scenario == "2":
            summary["scenario2_check"] = scenario2_check(record, p).model_dump()

        if section.sweep_d:
            sweep_scenario = int(section.scenario) if section.scenario in ("1", "2", "3") else 3
            sweep = diffusion_sweep(p, grid, section.sweep_d, section.t_end, sweep_scenario)
            summary["sweep"] = sweep.model_dump()
            if cfg.output.svg:
                ds = np.array([pt.d for pt in sweep.points])
                store.write_svg("sweep.svg", plotting.sweep_svg(ds, np.array([pt.right_mean_w for pt in sweep.points])))

        if section.front_speed:
            store.write_json("summary.json", summary)
            trace = front_speed(record, section.theta, section.direction)
            c_star = 2.0 * float(np.sqrt(p.d * (p.a31 - p.mu))) if p.a31 > p.mu else None
            summary["front"] = {
                "speed": trace.speed,
                "r_squared": trace.r_squared,
                "traversal": trace.traversal,
                "theta": trace.theta,
                "c_star": c_star,
                "relative_error": abs(trace.speed - c_star) / c_star if c_star else None,
            }
            logger.info("Front speed %.4f at theta=%g (c_star=%s)", trace.speed, trace.theta,
                        f"{c_star:.4f}" if c_star else "n/a")
            if cfg.output.svg:
                store.write_svg("front.svg", plotting.front_svg(trace))
        store.write_json("summary.json", summary)

    click.echo(f"t_end={section.t_end:g}: {record.times.size} snapshots, dt={record.dt:.4g} ({record.mode})")
    if "front" in summary:
        click.echo(f"front speed {summary['front']['speed']:.4f} (c_star {summary['front']['c_star']})")
    return EXIT_OK


@cli.command("wave")
@run_options
@click.option("--c", "speed", type=float, default=None, help="Wave speed (wave.c).")
@click.option("--eps", type=float, default=None, help="Radius of the starting curve (wave.eps).")
@click.option("--horizon", type=float, default=None)
def cmd_wave(config_path, assignments, output_dir, speed, eps, horizon) -> int:
    """Shoot for a traveling wave; profile CSV plus certification record."""
    cfg = resolve(config_path, assignments, {"wave.c": speed, "wave.eps": eps, "wave.horizon": horizon})
    p, section = cfg.params, cfg.wave

    with open_store(cfg, "wave", output_dir) as store:
        result = find_wave(p, wave_config(p, section.c), section.eps, section.z_tol, section.horizon,
                           section.converge_tol)
        store.write_wave(result)
        if cfg.output.svg:
            store.write_svg("profile.svg", plotting.wave_profile_svg(result))

    click.echo(f"c={section.c:g}: certified={result.certified}, tail distance {result.tail_distance:.3e}, "
               f"{result.stages} stages ({result.reason})")
    return EXIT_OK if result.certified else EXIT_NUMERICAL


if __name__ == "__main__":
    cli()
