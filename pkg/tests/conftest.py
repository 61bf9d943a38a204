# tests/conftest.py
import sys
from pathlib import Path

import pytest
from hypothesis import settings

# Make 'core', 'routers' and the entry points importable.
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

settings.register_profile("lab", deadline=None, max_examples=40)
settings.load_profile("lab")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale run, skipped unless --runslow is given")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
