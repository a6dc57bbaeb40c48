"""Shared fixtures: seeded generators and a float64 default element type."""

from pathlib import Path

import numpy as np
import pytest
from loguru import logger

from tensor.tensor import default_dtype

FIXTURES = Path(__file__).parent / "fixtures"
CONFIGS = Path(__file__).parent.parent / "configs"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    """Run the test with float64 as the default tensor element type."""
    with default_dtype(np.float64):
        yield


@pytest.fixture
def log_records():
    """Collect loguru messages emitted during the test."""
    messages: list[str] = []
    sink = logger.add(lambda message: messages.append(message.record["message"]), level="DEBUG")
    yield messages
    logger.remove(sink)
