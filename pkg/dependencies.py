# dependencies.py
import sys
from pathlib import Path

# Keep the project root importable when served with `uvicorn --reload`.
current_file_dir = Path(__file__).resolve().parent
if str(current_file_dir) not in sys.path:
    sys.path.insert(0, str(current_file_dir))

from typing import Optional

from core.registry import OramRegistry
from core.settings import Settings, get_settings as load_process_settings

# --- Registry Dependency ---
_registry_instance: Optional[OramRegistry] = None


def get_registry() -> OramRegistry:
    global _registry_instance
    if _registry_instance is None:
        _registry_instance = OramRegistry()
    return _registry_instance


# --- Settings Dependency ---
def get_settings() -> Settings:
    return load_process_settings()
