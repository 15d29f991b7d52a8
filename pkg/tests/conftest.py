import numpy as np
import pytest

from dpmestim.harness import gen_robust_data
from dpmestim.model import fit, logistic_loss, robust_log_loss


@pytest.fixture
def robust():
    return robust_log_loss()


@pytest.fixture
def logistic():
    return logistic_loss()


@pytest.fixture
def small_robust(robust):
    data, theta_star = gen_robust_data(200, 3, 1.0, 0.5, 42)
    return data, fit(data, robust, 0.3)


def random_spd(rng, d, lo=0.1, hi=3.0):
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return (Q * rng.uniform(lo, hi, d)) @ Q.T
