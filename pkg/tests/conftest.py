import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from common import SCHEDULE, cosine_spec, shipped_spec  # noqa: E402


@pytest.fixture(scope="session")
def spec():
    return shipped_spec()


@pytest.fixture(scope="session")
def spec0():
    return shipped_spec().with_coupling(0.0)


@pytest.fixture(scope="session")
def cosine():
    return cosine_spec()


@pytest.fixture(scope="session")
def schedule():
    return SCHEDULE
