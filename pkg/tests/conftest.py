from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from neuron import EmbedderConfig, MemoryStore


@pytest.fixture
def config() -> EmbedderConfig:
    return EmbedderConfig()


@pytest.fixture
def store(config: EmbedderConfig) -> MemoryStore:
    return MemoryStore(config)
