from __future__ import annotations

import logging
import os
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from settings import DEFAULT_OUTPUT_DIR

logger = logging.getLogger(__name__)

TMP_SUFFIX = ".tmp"


def _load_output_config_from_env() -> Dict[str, Any]:
    """Load output-store config from the environment and validate it."""
    root = os.environ.get("PREDPREY_OUTPUT_DIR", DEFAULT_OUTPUT_DIR).strip()
    if not root:
        raise RuntimeError("Missing required output env var: PREDPREY_OUTPUT_DIR is empty")
    return {"root": root}


class AbstractBaseOutputStore(ABC):
    """
    Abstract base class for run-output stores.
    Manages the run directory lifecycle and defines the file API.
    """

    def __init__(self, run_dir: Optional[Union[str, Path]] = None, command: str = "run",
                 output_config: Optional[Dict[str, Any]] = None):
        self._output_config = output_config or _load_output_config_from_env()
        self.run_dir = Path(run_dir) if run_dir is not None else Path(self._output_config["root"]) / command
        self._open = False

    # -------- Context manager helpers (with ... as store) ----------
    def __enter__(self):
        self.open()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()

    # ------------------ Directory lifecycle -------------------------
    def open(self) -> None:
        """Create the run directory if needed."""
        if not self._open:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            self._open = True
            logger.info("Writing run outputs to %s", self.run_dir)

    def close(self) -> None:
        """Drop staging files left behind by an interrupted write."""
        if self._open:
            for leftover in self.run_dir.glob(f"*{TMP_SUFFIX}"):
                leftover.unlink(missing_ok=True)
                logger.debug("Removed stale staging file %s", leftover)
            self._open = False

    def path(self, name: str) -> Path:
        return self.run_dir / name

    # -------------------------- File API -----------------------------
    @abstractmethod
    def write_text(self, name: str, text: str) -> Path: ...
    @abstractmethod
    def write_bytes(self, name: str, data: bytes) -> Path: ...
    @abstractmethod
    def read_text(self, name: str) -> str: ...
    @abstractmethod
    def list_files(self) -> List[str]: ...
