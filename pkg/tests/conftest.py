"""Pytest configuration and fixtures."""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

# Add qchain package to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def golden():
    return json.loads((GOLDEN_DIR / "default.json").read_text())


@pytest.fixture(scope="session")
def small_chain():
    """Five blocks at difficulty 8, mined once per session."""
    from qchain.chain import mine_chain

    chain, _ = mine_chain(5, 8, np.random.default_rng(7))
    return chain
