import os
import sys

import numpy as np
import pytest

# Add the repository root so the flat top-level modules import from tests/
sys.path.append(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture
def rng():
    """Seeded generator shared by the randomized property checks."""
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _default_environment(monkeypatch):
    for name in ('ISLKIT_DT', 'ISLKIT_WORKERS', 'ISLKIT_LOG_LEVEL'):
        monkeypatch.delenv(name, raising=False)
