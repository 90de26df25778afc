from __future__ import annotations

import io
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np
from pydantic import BaseModel

from models.field import SpaceTimeRecord
from models.run_config import RunConfig
from models.trajectory import Trajectory
from models.wave import WaveResult
from settings import APP_NAME, __version__
from storage.abstract_base import TMP_SUFFIX, AbstractBaseOutputStore

logger = logging.getLogger(__name__)

CSV_FMT = "%.17g"


class RunOutputStore(AbstractBaseOutputStore):
    """
    Files of one CLI run. Every file is staged next to its target and
    published with os.replace, so readers never see a partial file.
    """

    # ------------------------- Raw I/O ---------------------------
    def write_bytes(self, name: str, data: bytes) -> Path:
        self.open()
        target = self.path(name)
        staging = target.with_name(target.name + TMP_SUFFIX)
        try:
            staging.write_bytes(data)
            os.replace(staging, target)
        except OSError as err:
            logger.error("Write of %s failed: %s", target, err)
            staging.unlink(missing_ok=True)
            raise
        logger.debug("Wrote %s (%d bytes)", target, len(data))
        return target

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def read_text(self, name: str) -> str:
        return self.path(name).read_text(encoding="utf-8")

    def list_files(self) -> List[str]:
        return sorted(p.name for p in self.run_dir.iterdir() if p.is_file() and not p.name.endswith(TMP_SUFFIX))

    def write_json(self, name: str, payload: Any) -> Path:
        if isinstance(payload, BaseModel):
            payload = payload.model_dump(mode="json")
        return self.write_text(name, json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")

    def read_json(self, name: str) -> Any:
        return json.loads(self.read_text(name))

    def read_csv(self, name: str) -> np.ndarray:
        """Numeric body of a CSV written by this store (header and '#' lines skipped)."""
        return np.loadtxt(self.path(name), delimiter=",", skiprows=1, comments="#", ndmin=2)

    def _write_table(self, name: str, header: str, rows: np.ndarray, trailer: Sequence[str] = ()) -> Path:
        buffer = io.StringIO()
        np.savetxt(buffer, rows, delimiter=",", header=header, comments="", fmt=CSV_FMT)
        for line in trailer:
            buffer.write(f"# {line}\n")
        return self.write_text(name, buffer.getvalue())

    # ------------------------ Provenance --------------------------
    def write_provenance(self, config: RunConfig, command: str) -> None:
        """config.json (resolved config) and metadata.json (tool, version, d note)."""
        self.write_json("config.json", config)
        d_note = "d not given; defaulted to 1.0" if config.d_defaulted else "d given in config"
        self.write_json("metadata.json", {
            "tool": APP_NAME,
            "version": __version__,
            "command": command,
            "d": config.params.d,
            "d_defaulted": config.d_defaulted,
            "d_note": d_note,
            "seed": config.seed,
            "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        })

    # ---------------------- Model → File ---------------------------
    def write_trajectory(self, traj: Trajectory, name: str = "trajectory.csv") -> Path:
        """Columns t,u,v,w; events follow the data as '# t=<time> <tag> <detail>' lines."""
        rows = np.column_stack([traj.times, traj.states])
        trailer = [f"t={e.time:.17g} {e.tag} {e.detail}".rstrip() for e in traj.events]
        return self._write_table(name, "t,u,v,w", rows, trailer)

    def write_batch(self, rows: List[Dict[str, Any]], name: str = "batch.csv") -> Path:
        """One row per random start: u0,v0,w0,converged_to,time."""
        lines = ["u0,v0,w0,converged_to,time"]
        for row in rows:
            time = "" if row["time"] is None else f"{row['time']:.17g}"
            lines.append(f"{row['u0']:.17g},{row['v0']:.17g},{row['w0']:.17g},{row['converged_to'] or 'none'},{time}")
        return self.write_text(name, "\n".join(lines) + "\n")

    def write_wave(self, result: WaveResult) -> None:
        """profile.csv (t,x1,x2,y,z) and the certification record wave.json."""
        rows = np.column_stack([result.times, result.states])
        self._write_table("profile.csv", "t,x1,x2,y,z", rows)
        record = result.model_dump(mode="json", exclude={"times", "states"})
        record["samples"] = int(result.times.size)
        self.write_json("wave.json", record)

    def write_space_time(self, record: SpaceTimeRecord) -> List[Path]:
        """u.csv, v.csv, w.csv: one row per output time, first column t, then cell centers."""
        header = "t," + ",".join(f"{x:.17g}" for x in record.grid.centers)
        paths = []
        for species in ("u", "v", "w"):
            rows = np.column_stack([record.times, record.species(species)])
            paths.append(self._write_table(f"{species}.csv", header, rows))
        return paths

    def write_svg(self, name: str, svg: bytes) -> Path:
        return self.write_bytes(name, svg)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
