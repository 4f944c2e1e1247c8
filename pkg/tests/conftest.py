from pathlib import Path

import pytest

from lpar.gateway.config import build_platform

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
BANKING_CONFIG = FIXTURES / "banking.json"
BANKING_SCENARIO = FIXTURES / "banking_scenario.txt"


@pytest.fixture
def banking():
    return build_platform(BANKING_CONFIG)


@pytest.fixture
def fixtures_dir():
    return FIXTURES
