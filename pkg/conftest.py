"""Pytest configuration file to ensure project root is on sys.path.

This allows test modules executed from subdirectories (e.g., tests/) to import
the `ifpt2d` package without installing the project. Long Monte Carlo checks are
marked `slow` and only run with IFPT2D_RUN_SLOW=1.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest

ROOT_DIR = Path(__file__).resolve().parent
# Prepend project root to sys.path if not already present
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo acceptance checks (set IFPT2D_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("IFPT2D_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set IFPT2D_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
