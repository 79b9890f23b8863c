import numpy as np
import pytest

from pikernel import _accel, schemes
from pikernel.datagen import rng_for
from pikernel.evaluation import BootstrapConfig, resample_means
from pikernel.freqgrid import FrequencyGrid, lattice_sums, toeplitz_from_lattice

pytestmark = pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")


@pytest.fixture
def both():
    def run(fn):
        out = {}
        for be in ("numba", "numpy"):
            _accel.set_backend(be)
            out[be] = np.asarray(fn())
        return out["numba"], out["numpy"]

    prev = _accel.backend()
    yield run
    _accel.set_backend(prev)


@pytest.mark.parametrize("d,m", [(1, 5), (2, 3), (3, 2)])
def test_lattice_sums_agree(both, d, m):
    g = FrequencyGrid(d, m, (1.0,) * d)
    X = rng_for(d).uniform(-0.5, 0.5, (300, d))
    a, b = both(lambda: lattice_sums(g, X, 2 * m))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-10)
    a, b = both(lambda: toeplitz_from_lattice(g, lattice_sums(g, X, 2 * m)))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-10)


@pytest.mark.parametrize("name", ["euler", "rk4", "cn"])
def test_wave_schemes_agree(both, name):
    g = schemes.WaveGrid(*schemes.split_budget(2000), 0.05, 3)
    fn = getattr(schemes, f"{name}_wave")
    a, b = both(lambda: fn(g, keep_field=True).field)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("mode", ["moving_block", "stationary"])
def test_bootstrap_means_agree(both, mode):
    Z = rng_for(0).standard_normal((257, 3))
    cfg = BootstrapConfig(block=6, replicates=300, mode=mode, seed=2)
    a, b = both(lambda: resample_means(Z, cfg))
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_set_backend():
    prev = _accel.backend()
    try:
        _accel.set_backend("numpy")
        assert _accel.backend() == "numpy"
        with pytest.raises(ValueError):
            _accel.set_backend("cuda")
    finally:
        _accel.set_backend(prev)


def test_env_flag(monkeypatch):
    for val, off in (("1", True), ("true", True), ("0", False), ("", False), ("no", False)):
        monkeypatch.setenv("PIKERNEL_DISABLE_NUMBA", val)
        assert _accel._env_disabled() is off
