import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from odeal.data import generate_synthetic_dataset


@pytest.fixture(scope="session")
def small_synthetic():
    """1k-row pool with a 2% error rate; fast enough for most engine tests."""
    return generate_synthetic_dataset(n=1000, error_rate=0.02, seed=11)


@pytest.fixture(scope="session")
def midsize_synthetic():
    """5k-row pool at 1% errors, for detector and session behavior tests."""
    return generate_synthetic_dataset(n=5000, error_rate=0.01, seed=23)
