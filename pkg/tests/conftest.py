import pytest

from ewflab.protocol import Protocol


@pytest.fixture(scope="session")
def protocol() -> Protocol:
    return Protocol()
