import pytest

from fflmpi import ScanConfig, TracerModel

from helpers import two_shape_phantom


@pytest.fixture(scope="session")
def sim_config():
    """Table-default scanner, simultaneous rotation."""
    return ScanConfig()


@pytest.fixture(scope="session")
def seq_config():
    return ScanConfig(rotation_mode="sequential")


@pytest.fixture(scope="session")
def tracer():
    return TracerModel()


@pytest.fixture(scope="session")
def phantom65(sim_config):
    return two_shape_phantom(65, sim_config)
