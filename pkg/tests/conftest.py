import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "pikernel", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("pikernel")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


def gauss_legendre_box(lo, hi, q=60):
    """Tensor Gauss-Legendre nodes and weights on a box."""
    x, w = np.polynomial.legendre.leggauss(q)
    nodes, weights = [], []
    for a, b in zip(np.atleast_1d(lo), np.atleast_1d(hi)):
        nodes.append(0.5 * (b - a) * x + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * w)
    mesh = np.meshgrid(*nodes, indexing="ij")
    wmesh = np.meshgrid(*weights, indexing="ij")
    P = np.stack([g.ravel() for g in mesh], axis=1)
    W = np.prod(np.stack([g.ravel() for g in wmesh], axis=1), axis=1)
    return P, W
