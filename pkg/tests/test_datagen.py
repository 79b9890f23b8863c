import numpy as np
import pytest

from conftest import gauss_legendre_box
from pikernel import datagen
from pikernel.datagen import (
    HEAT_MODELING_ERROR,
    gen_additive,
    gen_convection,
    gen_harmonic,
    gen_heat4d,
    gen_heat_hybrid,
    gen_hier_toy,
    gen_online,
    gen_wave_boundary,
    harmonic_basis,
    harmonic_residual,
    heat4d_residual,
    heat_residual,
    heat_truth,
    hier_toy_long,
    in_heat4d_boundary,
    write_csv,
)

GENERATORS = [
    lambda s: gen_harmonic(50, s),
    lambda s: gen_heat_hybrid(50, s),
    lambda s: gen_wave_boundary(50, 0.1, s),
    lambda s: gen_convection(50, 20.0, s),
    lambda s: gen_heat4d(50, s),
    lambda s: gen_additive(50, s),
]


@pytest.mark.parametrize("gen", GENERATORS)
def test_seed_determinism(gen):
    a, b, c = gen(3), gen(3), gen(4)
    np.testing.assert_array_equal(a.data.X, b.data.X)
    np.testing.assert_array_equal(a.data.Y, b.data.Y)
    assert not np.array_equal(a.data.X, c.data.X)


def test_rng_is_philox():
    assert isinstance(datagen.rng_for(0).bit_generator, np.random.Philox)
    # a fixed stream: guards against silent changes of generator or seeding
    np.testing.assert_array_equal(datagen.rng_for(0).integers(0, 2**31, 3), datagen.rng_for(0).integers(0, 2**31, 3))
    datagen.rng_for(-1)  # negative seeds wrap to 64 bits


def test_harmonic_solves_ode(rng):
    x = rng.uniform(-np.pi, np.pi, 100)
    assert np.max(np.abs(harmonic_residual(x))) <= 1e-10
    f1, f2 = harmonic_basis()
    h = 1e-4
    for f in (f1, f2):
        r = (f(x + h) - 2 * f(x) + f(x - h)) / h**2 + (f(x + h) - f(x - h)) / (2 * h) + f(x)
        assert np.max(np.abs(r)) <= 1e-6


def test_harmonic_noise_mean():
    n = 100_000
    g = gen_harmonic(n, seed=1)
    eps = g.data.Y - g.truth(g.data.X)
    assert abs(eps.mean()) <= 4 * 0.5 / np.sqrt(n)
    assert np.all(np.abs(g.data.X) <= np.pi)
    with pytest.raises(ValueError):
        gen_harmonic(0)


def _heat_norms():
    P, W = gauss_legendre_box([-np.pi, -np.pi], [np.pi, np.pi], q=80)
    return float(W @ heat_residual(P) ** 2), float(W @ heat_truth(P) ** 2)


def test_heat_residual_matches_finite_differences(rng):
    P = rng.uniform(-3, 3, (50, 2))
    h = 1e-4
    e0, e1 = np.array([h, 0.0]), np.array([0.0, h])
    dt = (heat_truth(P + e0) - heat_truth(P - e0)) / (2 * h)
    dxx = (heat_truth(P + e1) - 2 * heat_truth(P) + heat_truth(P - e1)) / h**2
    np.testing.assert_allclose(dt - dxx, heat_residual(P), atol=1e-6)


def test_heat_modeling_error_derived():
    # (d_t - d_xx) f* = 2 sin(2x), whose squared norm over the square is 8 pi^2
    res, norm = _heat_norms()
    assert res == pytest.approx(HEAT_MODELING_ERROR, rel=1e-10)
    expect_norm = np.pi * np.sinh(2 * np.pi) + np.pi**2 / 2
    assert norm == pytest.approx(expect_norm, rel=1e-10)
    assert gen_heat_hybrid(5).extra["modeling_error"] == HEAT_MODELING_ERROR


@pytest.mark.xfail(strict=True, reason="the stated value pi disagrees with the quadrature of the stated truth (8 pi^2)")
def test_heat_modeling_error_stated_value():
    assert _heat_norms()[0] == pytest.approx(np.pi, abs=1e-3)


@pytest.mark.xfail(strict=True, reason="the stated ratio 4e-3 disagrees with the quadrature of the stated truth (about 0.093)")
def test_heat_modeling_ratio_stated_value():
    res, norm = _heat_norms()
    assert res / norm == pytest.approx(4e-3, rel=0.2)


def test_wave_boundary_groups():
    n = 1003
    g = gen_wave_boundary(n)
    q = n // 4
    assert g.extra["groups"] == (q, q, q, n - 3 * q)
    X, Y = g.data.X, g.data.Y
    np.testing.assert_array_equal(X[:q, 0], 0.0)
    np.testing.assert_array_equal(X[q:2 * q, 1], 0.0)
    np.testing.assert_array_equal(X[2 * q:3 * q, 1], 1.0)
    np.testing.assert_array_equal(X[3 * q:, 0], 1.0 / n)
    np.testing.assert_array_equal(Y[q:3 * q], 0.0)
    np.testing.assert_allclose(Y[:q], g.truth(X[:q]), atol=1e-14)
    with pytest.raises(ValueError):
        gen_wave_boundary(3)


def test_wave_taylor_row_formula():
    n = 1000
    expect = (1 - 2 * np.pi**2 / 1e6) * np.sin(np.pi / 4) + (0.5 - 16 * np.pi**2 / 1e6) * np.sin(np.pi)
    assert datagen.wave_taylor_row(0.25, n) == pytest.approx(expect, abs=1e-12)
    # second-order accurate against the truth
    U = np.linspace(0, 1, 11)
    err = np.abs(datagen.wave_taylor_row(U, n) - datagen.wave_truth(np.column_stack([np.full(11, 1 / n), U])))
    assert err.max() <= 10 * (8 * np.pi / n) ** 4


def test_wave_centered_and_noise():
    a = gen_wave_boundary(100, 0.0, 0, centered=True)
    b = gen_wave_boundary(100, 0.0, 0)
    np.testing.assert_allclose(a.data.X, b.data.X - 0.5)
    np.testing.assert_allclose(a.truth(a.data.X), b.truth(b.data.X))
    noisy = gen_wave_boundary(100, 0.1, 0)
    assert np.std(noisy.data.Y - b.data.Y) == pytest.approx(0.1, rel=0.3)


def test_wave_truth_solves_pde(rng):
    P = rng.uniform(0, 1, (50, 2))
    h = 1e-4
    e0, e1 = np.array([h, 0.0]), np.array([0.0, h])
    f = datagen.wave_truth
    tt = (f(P + e0) - 2 * f(P) + f(P - e0)) / h**2
    xx = (f(P + e1) - 2 * f(P) + f(P - e1)) / h**2
    assert np.max(np.abs(tt - 4 * xx)) <= 1e-3


def test_convection():
    g = gen_convection(200, 30.0, seed=2)
    X, Y = g.data.X, g.data.Y
    np.testing.assert_array_equal(X[:, 0], -0.5)
    np.testing.assert_allclose(Y, g.truth(X), atol=1e-12)
    P = np.array([[0.1, 0.3]])
    h = 1e-6
    dt = (g.truth(P + [h, 0]) - g.truth(P - [h, 0])) / (2 * h)
    dx = (g.truth(P + [0, h]) - g.truth(P - [0, h])) / (2 * h)
    assert abs(dt + 30 * dx)[0] <= 1e-6


def test_heat4d(rng):
    P = rng.uniform(-0.5, 0.5, (100, 4))
    assert np.max(np.abs(heat4d_residual(P))) <= 1e-10
    f = datagen.heat4d_truth
    h = 1e-4
    E = np.eye(4) * h
    r = (f(P + E[0]) - f(P - E[0])) / (2 * h)
    for j in (1, 2, 3):
        r -= (f(P + E[j]) - 2 * f(P) + f(P - E[j])) / h**2
    assert np.max(np.abs(r)) <= 1e-5
    g = gen_heat4d(2000, seed=1)
    assert np.all(in_heat4d_boundary(g.data.X))
    share = np.mean(g.data.X[:, 0] == 0.0)
    assert share == pytest.approx(1 / 7, abs=0.03)
    assert not in_heat4d_boundary(np.zeros((1, 4)) + 0.1)[0]


def test_hier_toy():
    toy = gen_hier_toy(5, 200, 50, 0.3, seed=1, sigma1=1.0)
    X1, X2 = toy.X1, toy.X2
    e1 = toy.Y[:, 0] - X1 @ toy.theta1
    eagg = toy.Y[:, 2] - X1 @ toy.theta1 - X2 @ toy.theta2
    e2 = toy.Y[:, 1] - X2 @ toy.theta2
    np.testing.assert_allclose(e2 + e1, eagg, atol=1e-12)  # eps1 cancels in the aggregate
    assert np.std(eagg) == pytest.approx(0.3, rel=0.25)
    assert np.std(e1) >= np.std(eagg)
    np.testing.assert_allclose(toy.Y, toy.Y[:, :2] @ toy.S.T, atol=1e-12)
    np.testing.assert_allclose(toy.Y[:, [2, 0, 1]], toy.Y[:, :2] @ toy.S_sum_first.T, atol=1e-12)
    assert toy.Y_test.shape == (50, 3)


def test_hier_toy_long():
    toy = gen_hier_toy(2, 10, 5, 0.3)
    cols, parents = hier_toy_long(toy)
    assert len(cols["node"]) == 45
    assert set(cols) == {"node", "t", "y", "x1", "x2", "x3", "x4"}
    assert ("total", None) in parents


def test_additive_and_online():
    g = gen_additive(100, seed=1)
    np.testing.assert_allclose(g.truth(g.data.X), np.sin(2 * g.data.X[:, 0]) + 0.5 * g.data.X[:, 1])
    d = gen_online(300)
    assert set(d) == {"t", "y", "g1", "g2", "expert1", "expert2"}
    assert all(len(v) == 300 for v in d.values())


def test_write_csv(tmp_path):
    g = gen_harmonic(5, seed=0)
    path = tmp_path / "h.csv"
    write_csv(g.data, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,y"
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, 0], g.data.X[:, 0])
    np.testing.assert_array_equal(back[:, 1], g.data.Y)
