import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).resolve().parent))

from meshenkf import MeshTolerances, reference_partition

settings.register_profile(
    "ci",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    max_examples=50,
)
settings.load_profile("ci")


@pytest.fixture
def bgm_tol():
    return MeshTolerances(0.01, 0.02, 1.0)


@pytest.fixture
def bgm_partition(bgm_tol):
    return reference_partition(bgm_tol)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
