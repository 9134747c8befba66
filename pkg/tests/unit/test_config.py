import pytest
from pydantic import ValidationError

from app.config import Settings


def test_defaults_are_deterministic():
    config = Settings(_env_file=None)
    assert config.DETERMINISTIC is True
    assert (config.SIM_ALPHA, config.SIM_BETA) == (0.5, 0.1)


@pytest.mark.parametrize("alpha,beta", [(0.1, 0.5), (0.5, 0.5), (1.0, 0.1), (0.5, 0.0)])
def test_similarity_factors_must_be_ordered(alpha, beta):
    with pytest.raises(ValidationError):
        Settings(_env_file=None, SIM_ALPHA=alpha, SIM_BETA=beta)


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("SEED", "42")
    monkeypatch.setenv("HAMLET_OUT", "/tmp/reports")
    config = Settings(_env_file=None)
    assert config.SEED == 42
    assert config.OUT_DIR == "/tmp/reports"


def test_invalid_runtime_values():
    with pytest.raises(ValidationError):
        Settings(_env_file=None, MAX_WORKERS=0)
    with pytest.raises(ValidationError):
        Settings(_env_file=None, TRAIN_SPLIT=1.5)
