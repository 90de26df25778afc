from __future__ import annotations

import io
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from models.field import FrontTrace, SpaceTimeRecord  # noqa: E402
from models.trajectory import Trajectory  # noqa: E402
from models.wave import WaveResult  # noqa: E402

# Fixed so identical data gives byte-identical SVG.
plt.rcParams["svg.hashsalt"] = "predprey-waves"
plt.rcParams["svg.fonttype"] = "path"

SPECIES_LABELS = {"u": "prey u", "v": "generalist predator v", "w": "specialist predator w"}


def _to_svg(fig) -> bytes:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buffer.getvalue()


def heatmap_svg(record: SpaceTimeRecord, species: str) -> bytes:
    """Space-time density of one species; x horizontal, time vertical."""
    data = record.species(species)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    image = ax.imshow(
        data,
        origin="lower",
        aspect="auto",
        extent=[0.0, record.grid.length, float(record.times[0]), float(record.times[-1])],
        cmap="viridis",
        interpolation="nearest",
    )
    fig.colorbar(image, ax=ax, label=species)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title(SPECIES_LABELS[species])
    fig.tight_layout()
    return _to_svg(fig)


def initial_profiles_svg(record: SpaceTimeRecord) -> bytes:
    x = record.grid.centers
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for species in ("u", "v", "w"):
        ax.plot(x, record.species(species)[0], label=species)
    ax.set_xlabel("x")
    ax.set_ylabel("density at t=0")
    ax.legend()
    ax.grid(True)
    fig.tight_layout()
    return _to_svg(fig)


def front_svg(trace: FrontTrace) -> bytes:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(trace.times, trace.positions, ".", label=f"theta={trace.theta:g}")
    sign = 1.0 if trace.direction == "right" else -1.0
    ax.plot(trace.times, trace.intercept + sign * trace.speed * trace.times, "-", label=f"fit, speed={trace.speed:.4f}")
    ax.set_xlabel("t")
    ax.set_ylabel("front position")
    ax.legend()
    ax.grid(True)
    fig.tight_layout()
    return _to_svg(fig)


def trajectory_svg(traj: Trajectory, title: Optional[str] = None) -> bytes:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for i, species in enumerate(("u", "v", "w")):
        ax.plot(traj.times, traj.states[:, i], label=species)
    ax.set_xlabel("t")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True)
    fig.tight_layout()
    return _to_svg(fig)


def wave_profile_svg(result: WaveResult) -> bytes:
    """Profile components against the moving coordinate."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for i, label in enumerate(("U (x1)", "V (x2)", "W (y)")):
        ax.plot(result.times, result.states[:, i], label=label)
    ax.set_xlabel("moving coordinate")
    ax.set_ylabel("density")
    ax.set_title(f"c={result.config.c:g}, certified={result.certified}")
    ax.legend()
    ax.grid(True)
    fig.tight_layout()
    return _to_svg(fig)


def sweep_svg(ds: np.ndarray, values: np.ndarray) -> bytes:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(ds, values, "o-")
    ax.set_xscale("log")
    ax.set_xlabel("d")
    ax.set_ylabel("right-half mean of w")
    ax.grid(True)
    fig.tight_layout()
    return _to_svg(fig)
