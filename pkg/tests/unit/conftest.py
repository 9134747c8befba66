import pytest

from app.config import Settings
from app.system import HolarchySystem


@pytest.fixture
def config():
    return Settings(DETERMINISTIC=True, SEED=0, SIM_ALPHA=0.5, SIM_BETA=0.1, STRICT_CFP=False, TRACE_FILE="")


@pytest.fixture
def system(config):
    holarchy = HolarchySystem(config)
    yield holarchy
    holarchy.close()
