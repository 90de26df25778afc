from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values
from pydantic import ValidationError

from models.params import ModelParams
from models.run_config import OdeSection, OutputSection, PdeSection, RunConfig, WaveSection
from services.errors import ConfigError

logger = logging.getLogger(__name__)

MODEL_KEYS = ("r1", "r2", "mu", "a12", "a13", "a21", "a31")
TOP_LEVEL_KEYS = MODEL_KEYS + ("d", "seed")
SECTIONS = {"ode": OdeSection, "pde": PdeSection, "wave": WaveSection, "output": OutputSection}
DEFAULT_D = 1.0
FLAG_SOURCE = "command line"

PathLike = Union[str, Path]
Origin = Tuple[str, Optional[int]]


# ---------------------- Raw key/value layer ------------------------
def _key_lines(path: Path) -> Dict[str, int]:
    """Line number of the last assignment of each key (dotenv keeps the last one too)."""
    lines: Dict[str, int] = {}
    for number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        if text.startswith("export "):
            text = text[len("export "):].lstrip()
        key = text.split("=", 1)[0].strip()
        if key:
            lines[key] = number
    return lines


def read_config_file(path: PathLike) -> Tuple[Dict[str, Optional[str]], Dict[str, Origin]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config file not found", source=str(path))
    values = dict(dotenv_values(path, interpolate=False))
    lines = _key_lines(path)
    origins = {key: (str(path), lines.get(key)) for key in values}
    return values, origins


def parse_assignment(text: str) -> Tuple[str, str]:
    """Split a `--set key=value` argument."""
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}", source=FLAG_SOURCE)
    key, value = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"empty key in {text!r}", source=FLAG_SOURCE)
    return key, value.strip()


# ------------------------ Structuring layer ------------------------
def _structure(values: Mapping[str, Any], origins: Mapping[str, Origin]) -> Dict[str, Any]:
    tree: Dict[str, Any] = {"params": {}, **{name: {} for name in SECTIONS}}
    for key, value in values.items():
        source, line = origins.get(key, (FLAG_SOURCE, None))
        if value is None:
            raise ConfigError("has no value", key=key, line=line, source=source)
        if "." in key:
            section, field = key.split(".", 1)
            model = SECTIONS.get(section)
            if model is None or field not in model.model_fields:
                raise ConfigError("unknown configuration key", key=key, line=line, source=source)
            tree[section][field] = value
        elif key in TOP_LEVEL_KEYS:
            if key == "seed":
                tree["seed"] = value
            else:
                tree["params"][key] = value
        else:
            raise ConfigError("unknown configuration key", key=key, line=line, source=source)
    return tree


def _error_key(loc: Tuple[Any, ...]) -> str:
    parts = [str(part) for part in loc]
    if parts and parts[0] == "params":
        parts = parts[1:]
    return ".".join(parts)


def _validate(tree: Dict[str, Any], origins: Mapping[str, Origin], default_source: str) -> RunConfig:
    try:
        return RunConfig(**tree)
    except ValidationError as err:
        first = err.errors()[0]
        key = _error_key(first["loc"])
        source, line = origins.get(key, (default_source, None))
        message = first["msg"]
        if message.startswith("Value error, "):
            message = message[len("Value error, "):]
        raise ConfigError(message, key=key, line=line, source=source) from err


def load_run_config(path: Optional[PathLike] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Resolve a RunConfig from a key=value file plus command-line overrides.

    Overrides win over the file. Without a file the reference parameter set
    is used. Every model key except `d` is required; a missing `d` becomes
    1.0 and is recorded in `d_defaulted`.
    """
    if path is not None:
        values, origins = read_config_file(path)
        source = str(path)
    else:
        values = {key: str(value) for key, value in ModelParams.reference().model_dump().items()}
        origins = {}
        source = FLAG_SOURCE
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        values[key] = value
        origins[key] = (FLAG_SOURCE, None)

    tree = _structure(values, origins)
    missing = [key for key in MODEL_KEYS if key not in tree["params"]]
    if missing:
        raise ConfigError(f"missing required model keys: {', '.join(missing)}", key=missing[0], source=source)
    if "d" not in tree["params"]:
        tree["params"]["d"] = DEFAULT_D
        tree["d_defaulted"] = True
        logger.info("Diffusion coefficient d not set; using d=%g", DEFAULT_D)
    return _validate(tree, origins, source)


def load_params(path: PathLike) -> ModelParams:
    """Model parameters from a config file; other sections are validated but ignored."""
    return load_run_config(path).params
