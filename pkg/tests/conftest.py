import json
from pathlib import Path

import pytest

from cpsarch.catalog import default_catalog

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
CAMPAIGNS = Path(__file__).resolve().parent.parent / "campaigns"
MODEL_FIXTURES = ("empty", "nested6", "accsim", "scsim")


def expected(name: str) -> dict:
    return json.loads((FIXTURES / f"{name}.expected.json").read_text())


@pytest.fixture(scope="session")
def table():
    return default_catalog()
