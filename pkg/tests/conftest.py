import pytest

from hiermem.model import Config
from hiermem.providers import StubProvider


@pytest.fixture
def stub() -> StubProvider:
    return StubProvider()


@pytest.fixture
def small_stub() -> StubProvider:
    return StubProvider(dim=32)


@pytest.fixture
def small_config() -> Config:
    return Config(embedding_dim=32)
