from __future__ import annotations

import numpy as np
import pytest

from models.field import Grid1D
from models.trajectory import Trajectory, TrajectoryEvent
from services.config_loader import load_run_config
from services.pde_simulator import make_scenario, run
from settings import APP_NAME, __version__
from storage.abstract_base import _load_output_config_from_env
from storage.run_store import RunOutputStore


@pytest.fixture
def store(tmp_path):
    with RunOutputStore(run_dir=tmp_path / "run") as s:
        yield s


def test_output_root_comes_from_the_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("PREDPREY_OUTPUT_DIR", str(tmp_path / "out"))
    s = RunOutputStore(command="ode")
    assert s.run_dir == tmp_path / "out" / "ode"
    monkeypatch.setenv("PREDPREY_OUTPUT_DIR", " ")
    with pytest.raises(RuntimeError, match="PREDPREY_OUTPUT_DIR"):
        _load_output_config_from_env()


def test_trajectory_csv(store):
    traj = Trajectory(
        times=[0.0, 0.5, 1.0],
        states=[[0.2, 0.1, 0.08], [0.25, 0.12, 0.07], [0.3, 0.13, 0.06]],
        events=[TrajectoryEvent(time=0.5, tag="clamp", detail="min=-1e-12")],
    )
    path = store.write_trajectory(traj)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,u,v,w"
    assert lines[-1] == "# t=0.5 clamp min=-1e-12"
    body = store.read_csv("trajectory.csv")
    assert body.shape == (3, 4)
    assert np.array_equal(body[:, 1:], traj.states)


def test_writes_leave_no_staging_files(store):
    store.write_text("a.txt", "x")
    store.write_json("b.json", {"k": 1})
    assert store.list_files() == ["a.txt", "b.json"]
    assert not any(p.name.endswith(".tmp") for p in store.run_dir.iterdir())


def test_close_removes_stale_staging_files(tmp_path):
    s = RunOutputStore(run_dir=tmp_path / "run")
    with s:
        (s.run_dir / "u.csv.tmp").write_text("partial", encoding="utf-8")
    assert not (tmp_path / "run" / "u.csv.tmp").exists()


def test_provenance(store, reference_config, tmp_path):
    cfg = load_run_config(reference_config)
    store.write_provenance(cfg, "analyze")
    meta = store.read_json("metadata.json")
    assert meta["tool"] == APP_NAME and meta["version"] == __version__
    assert meta["command"] == "analyze"
    assert meta["d"] == 1.0 and meta["d_defaulted"] is False
    assert store.read_json("config.json")["params"]["a31"] == 0.5


def test_space_time_csvs(store, params):
    grid = Grid1D(length=10.0, n_cells=20)
    record = run(params, make_scenario(1, grid), 1.0, output_every=0.5, mode="split")
    store.write_space_time(record)
    header = store.read_text("w.csv").splitlines()[0].split(",")
    assert header[0] == "t" and len(header) == 21
    w = store.read_csv("w.csv")
    assert w.shape == (3, 21)
    assert np.array_equal(w[:, 1:], record.w)


def test_batch_csv(store):
    store.write_batch([
        {"u0": 0.1, "v0": 0.2, "w0": 0.3, "converged_to": "Estar", "time": 12.5},
        {"u0": 0.4, "v0": 0.5, "w0": 0.6, "converged_to": None, "time": None},
    ])
    lines = store.read_text("batch.csv").splitlines()
    assert lines[0] == "u0,v0,w0,converged_to,time"
    assert lines[1] == "0.10000000000000001,0.20000000000000001,0.29999999999999999,Estar,12.5"
    assert lines[2].endswith(",none,")
