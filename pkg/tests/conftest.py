import pytest

from skinstretch.config import ExperimentConfig
from skinstretch.experiments import train_model


@pytest.fixture(scope="session")
def default_config():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def default_model(default_config):
    """Cubic model calibrated on the default full-rheology sensor (about 4 s)."""
    model, _ = train_model(default_config)
    return model
