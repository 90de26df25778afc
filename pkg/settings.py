from __future__ import annotations

import os
from typing import Any, Dict

from dotenv import load_dotenv

load_dotenv()

APP_NAME = "predprey-waves"
__version__ = "0.1.0"

DEFAULT_OUTPUT_DIR = "runs"
DEFAULT_LOG_LEVEL = "INFO"
LOG_FORMAT = "%(levelname)s: %(message)s"


def load_settings_from_env() -> Dict[str, Any]:
    """Load process-level settings from the environment (and `.env`)."""
    level = os.environ.get("PREDPREY_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise RuntimeError(f"Invalid PREDPREY_LOG_LEVEL: {level}")

    return {
        "output_dir": os.environ.get("PREDPREY_OUTPUT_DIR", DEFAULT_OUTPUT_DIR),
        "log_level": level,
    }
