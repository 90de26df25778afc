from __future__ import annotations

import pytest

from models.params import ModelParams
from services.config_loader import load_params, load_run_config, parse_assignment
from services.errors import ConfigError


def _write(tmp_path, text):
    path = tmp_path / "run.env"
    path.write_text(text, encoding="utf-8")
    return path


def test_reference_file(reference_config):
    cfg = load_run_config(reference_config)
    assert cfg.params == ModelParams.reference()
    assert cfg.seed == 7
    assert not cfg.d_defaulted
    assert cfg.wave.eps == 0.01
    assert load_params(reference_config) == ModelParams.reference()


def test_missing_model_keys_are_all_named(tmp_path):
    path = _write(tmp_path, "r1=0.7\nr2=0.3\nmu=0.15\na12=0.15\na13=0.5\n")
    with pytest.raises(ConfigError) as info:
        load_run_config(path)
    assert "a21" in str(info.value) and "a31" in str(info.value)


def test_missing_d_defaults_to_one(tmp_path, caplog):
    path = _write(tmp_path, "r1=0.7\nr2=0.3\nmu=0.15\na12=0.15\na13=0.5\na21=0.2\na31=0.5\n")
    with caplog.at_level("INFO"):
        cfg = load_run_config(path)
    assert cfg.params.d == 1.0
    assert cfg.d_defaulted
    assert "d=1" in caplog.text


def test_unknown_key_reports_its_line(reference_config):
    with reference_config.open("a", encoding="utf-8") as fh:
        fh.write("\nbogus=1\n")
    with pytest.raises(ConfigError) as info:
        load_run_config(reference_config)
    err = info.value
    assert err.key == "bogus"
    assert err.line == 12
    assert f"{reference_config}:12:" in str(err)


def test_unknown_section_field(reference_config):
    with pytest.raises(ConfigError, match="pde.gridsize"):
        load_run_config(reference_config, {"pde.gridsize": "10"})


def test_invalid_value_reports_key_and_line(tmp_path):
    path = _write(tmp_path, "r1=0.7\nr2=0.3\nmu=0.15\na12=0.15\na13=0.5\na21=0.2\na31=-0.5\n")
    with pytest.raises(ConfigError) as info:
        load_run_config(path)
    assert info.value.key == "a31"
    assert info.value.line == 7


def test_too_coarse_grid(reference_config):
    with pytest.raises(ConfigError, match="too coarse") as info:
        load_run_config(reference_config, {"pde.n_cells": "8"})
    assert info.value.key == "pde.n_cells"
    assert info.value.source == "command line"


def test_eps_outside_range_advises_smaller_eps(reference_config):
    with pytest.raises(ConfigError, match="smaller eps"):
        load_run_config(reference_config, {"wave.eps": "0.5"})


def test_zero_t_end_is_rejected(reference_config):
    with pytest.raises(ConfigError, match="ode.t_end"):
        load_run_config(reference_config, {"ode.t_end": "0"})


def test_overrides_win_over_the_file(reference_config):
    cfg = load_run_config(reference_config, {"r1": "0.8", "wave.c": 2.0, "pde.front_speed": "true"})
    assert cfg.params.r1 == 0.8
    assert cfg.wave.c == 2.0
    assert cfg.pde.front_speed is True


def test_dotenv_syntax(tmp_path):
    text = (
        "# comment\n"
        "export r1=0.7\n"
        "r2='0.3'\n"
        "mu=0.15  # inline comment\n"
        "a12=0.15\na13=0.5\na21=0.2\na31=0.5\n"
        'pde.sweep_d="0.1, 1, 10"\n'
        "pde.scenario=Invasion\n"
    )
    cfg = load_run_config(_write(tmp_path, text))
    assert cfg.params.r1 == 0.7 and cfg.params.r2 == 0.3 and cfg.params.mu == 0.15
    assert cfg.pde.sweep_d == [0.1, 1.0, 10.0]
    assert cfg.pde.scenario == "invasion"


def test_without_a_file_the_reference_set_is_used():
    cfg = load_run_config(None, {"wave.c": "1.8"})
    assert cfg.params == ModelParams.reference()
    assert cfg.wave.c == 1.8


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "nope.env")


def test_parse_assignment():
    assert parse_assignment("pde.n_cells = 400") == ("pde.n_cells", "400")
    assert parse_assignment("pde.profile_w=0:1:0.5") == ("pde.profile_w", "0:1:0.5")
    with pytest.raises(ConfigError):
        parse_assignment("r1")
    with pytest.raises(ConfigError):
        parse_assignment("=1")
