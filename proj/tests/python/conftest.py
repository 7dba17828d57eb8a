import os
import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture
def cli():
    path = os.environ.get("BHOM_CLI")
    if not path:
        pytest.skip("BHOM_CLI is not set")
    return path


@pytest.fixture
def configs():
    return ROOT / "configs"
