import pytest

from jcasnet.netmodel import default_params


@pytest.fixture(scope="session")
def params():
    return default_params()


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo or sweep checks")
