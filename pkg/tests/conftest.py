import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from payloadcheck import fixtures

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def panda():
    return fixtures.panda()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    # QR of a gaussian matrix, sign-fixed into SO(3)
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_q(model, rng, margin=0.05):
    lo, hi = model.lower_limits, model.upper_limits
    lo = np.where(np.isfinite(lo), lo + margin, -np.pi)
    hi = np.where(np.isfinite(hi), hi - margin, np.pi)
    return rng.uniform(lo, hi)
