import json
from pathlib import Path

import pytest

from dime.network import load_network
from dime.seeding import make_rng

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def demo_network():
    """Six labelled nodes, 7 edges; uncertain edge positions 1, 4, 5, 7
    (1-based edge numbering), certain positions 2, 3, 6."""
    return load_network((DATA_DIR / "demo_network.json").read_bytes())


@pytest.fixture
def demo_document():
    return json.loads((DATA_DIR / "demo_network.json").read_text())
