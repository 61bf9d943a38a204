# core/settings.py
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

ARTIFACT_VERSION = "1.0.0"


@dataclass(frozen=True)
class Settings:
    output_dir: Path
    log_level: str
    master_seed: int
    workers: int


_settings: Optional[Settings] = None


def load_settings() -> Settings:
    """Reads process settings from the environment (and a local .env, if present)."""
    load_dotenv()
    return Settings(
        output_dir=Path(os.getenv("ORAM_OUTPUT_DIR", "results")),
        log_level=os.getenv("ORAM_LOG_LEVEL", "INFO").upper(),
        master_seed=int(os.getenv("ORAM_MASTER_SEED", "0")),
        workers=max(1, int(os.getenv("ORAM_WORKERS", "1"))),
    )


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings
