import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pikernel import datagen
from pikernel.diffops import parse_operator
from pikernel.domains import Cube
from pikernel.experiments import run_convection, run_kernel_oracle, run_wave
from pikernel.freqgrid import FrequencyGrid
from pikernel.oracle1d import Oracle1DParams, kernel_exact
from pikernel.penalty import PenaltySpec, assemble_M, penalty_norm
from pikernel.pikl import (
    Dataset,
    IllConditionedWarning,
    empirical_risk,
    fit,
    fit_kernel_form,
    kernel_matrix,
    kernel_value,
    l2_relative_error,
    predict,
    risk_gradient,
    uniform_grid,
)


def _problem(rng, n=60, m=3, lam=1e-2, mu=0.5):
    g = FrequencyGrid.centered(2, m, 1.0)
    M = assemble_M(g, parse_operator("d1 - d2^2", 2), Cube([1.0, 1.0]), PenaltySpec(lam, mu, 2))
    X = rng.uniform(-1, 1, (n, 2))
    Y = np.cos(X[:, 0]) * np.sin(2 * X[:, 1]) + 0.1 * rng.standard_normal(n)
    return g, M, Dataset(X, Y)


@pytest.mark.parametrize("lam", [1e-3, 0.1, 2.0])
def test_single_mode_ridge(lam, rng):
    g = FrequencyGrid(1, 0, (np.pi,))
    M = assemble_M(g, None, None, PenaltySpec(lam))
    Y = rng.standard_normal(25)
    model = fit(g, M, Dataset(rng.uniform(-np.pi, np.pi, 25), Y))
    X = np.linspace(-np.pi, np.pi, 11)
    np.testing.assert_allclose(predict(model, X), Y.mean() / (1 + 2 * np.pi * lam), rtol=1e-13)


def test_constant_data_general_torus():
    g = FrequencyGrid(2, 0, (0.5, 2.0))
    lam = 0.3
    model = fit(g, assemble_M(g, None, None, PenaltySpec(lam)), Dataset(np.zeros((4, 2)), np.full(4, 2.5)))
    np.testing.assert_allclose(model(np.ones((3, 2)) * 0.1), 2.5 / (1 + g.vol * lam))


def test_interpolates_noiseless_bandlimited(rng):
    g = FrequencyGrid(2, 3, (1.0, 1.5))
    z = rng.standard_normal(g.n_modes) + 1j * rng.standard_normal(g.n_modes)
    z = 0.5 * (z + np.conj(z[g.mirror_index()]))
    n = 3 * g.n_modes
    X = np.column_stack([rng.uniform(-1, 1, n), rng.uniform(-1.5, 1.5, n)])
    Y = g.evaluate(z, X).real
    model = fit(g, assemble_M(g, None, None, PenaltySpec(1e-12)), Dataset(X, Y))
    assert np.max(np.abs(model(X) - Y)) <= 1e-6 * np.max(np.abs(Y))
    assert model.info["normal_residual"] <= 1e-10


def test_linear_in_targets(rng):
    g, M, d = _problem(rng)
    Y2 = rng.standard_normal(d.n)
    Xt = rng.uniform(-1, 1, (30, 2))
    p12 = fit(g, M, Dataset(d.X, d.Y + Y2))(Xt)
    p1 = fit(g, M, d)(Xt)
    p2 = fit(g, M, Dataset(d.X, Y2))(Xt)
    np.testing.assert_allclose(p12, p1 + p2, atol=1e-10)


def test_dimension_errors(rng):
    g, M, d = _problem(rng)
    with pytest.raises(ValueError):
        fit(g, M, Dataset(rng.uniform(size=(5, 3)), np.zeros(5)))
    with pytest.raises(ValueError):
        fit(FrequencyGrid(2, 2), M, d)
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 1)), np.zeros(4))
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 1)), np.zeros(0))
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), np.zeros(1))


def test_optimality_and_risk_dominance(rng):
    g, M, d = _problem(rng, n=40, m=2)
    model = fit(g, M, d)
    grad = risk_gradient(g, M, d, model.theta)
    b = g.design_matrix(d.X).conj().T @ d.Y
    assert np.linalg.norm(grad) <= 1e-8 * (1 + np.linalg.norm(b))
    # central differences on 20 random real coordinates, away from the optimum
    th = rng.standard_normal(g.n_modes) + 1j * rng.standard_normal(g.n_modes)
    gan = risk_gradient(g, M, d, th)
    h = 1e-6
    for k in rng.choice(g.n_modes, 20, replace=False):
        for unit, part in ((1.0, gan[k].real), (1j, gan[k].imag)):
            e = np.zeros(g.n_modes, complex)
            e[k] = unit * h
            fd = (empirical_risk(g, M, d, th + e) - empirical_risk(g, M, d, th - e)) / (2 * h)
            assert fd == pytest.approx(part, rel=1e-5, abs=1e-7)
    r0 = empirical_risk(g, M, d, model.theta)
    for _ in range(100):
        v = rng.standard_normal(g.n_modes) + 1j * rng.standard_normal(g.n_modes)
        assert r0 <= empirical_risk(g, M, d, model.theta + 1e-3 * v)


def test_kernel_trick_consistency(rng):
    g, M, d = _problem(rng, n=150, m=4)
    Xt = rng.uniform(-1, 1, (40, 2))
    feat = fit(g, M, d)(Xt)
    kern = fit_kernel_form(g, M, d)(Xt)
    assert np.linalg.norm(feat - kern) <= 1e-8 * np.linalg.norm(kern)


def test_kernel_hermitian_and_bounds(rng):
    g, M, _ = _problem(rng, lam=0.05)
    X = rng.uniform(-1, 1, (20, 2))
    K = kernel_matrix(g, M, X)
    np.testing.assert_allclose(K, K.conj().T, atol=1e-14)
    diag = np.diag(K).real
    assert np.all(diag >= 0)
    assert np.all(diag <= g.n_modes / (g.vol * 0.05) * (1 + 1e-12))
    x, y = X[0], X[1]
    assert kernel_value(g, M, x, y) == pytest.approx(np.conj(kernel_value(g, M, y, x)))


@given(l1=st.floats(1e-4, 1.0), factor=st.floats(1.0, 100.0), seed=st.integers(0, 1000))
def test_monotone_shrinkage(l1, factor, seed):
    r = np.random.default_rng(seed)
    g = FrequencyGrid.centered(1, 4, 1.0)
    d = Dataset(r.uniform(-1, 1, 30), r.standard_normal(30))
    M1 = assemble_M(g, None, None, PenaltySpec(l1))
    M2 = assemble_M(g, None, None, PenaltySpec(l1 * factor))
    # norm measured in a fixed metric (that of lam = 1)
    ref = assemble_M(g, None, None, PenaltySpec(1.0))
    n1 = penalty_norm(ref, fit(g, M1, d).theta)
    n2 = penalty_norm(ref, fit(g, M2, d).theta)
    assert n2 <= n1 * (1 + 1e-9)


def test_kernel_matches_closed_form_1d():
    res = run_kernel_oracle(m=400)
    assert res["sup_gap"] <= 1e-3
    assert res["fit_path_rel_diff"] <= 1e-8


def test_kernel_symmetric_real_1d():
    g = FrequencyGrid.centered(1, 60, 1.0)
    M = assemble_M(g, parse_operator("d1", 1), Cube([1.0]), PenaltySpec(1.0, 1.0, 1, "domain"))
    x = np.linspace(-1, 1, 9)[:, None]
    K = kernel_matrix(g, M, x)
    assert np.max(np.abs(K.imag)) <= 1e-10 * np.max(np.abs(K))
    exact = kernel_exact(Oracle1DParams(1.0, 1.0, 1.0), x, x.T)
    assert np.max(np.abs(K.real - exact)) < 0.05


def test_l2_relative_error_trivial():
    P = uniform_grid([-1, -1], [1, 1], 11)
    f = lambda X: np.sin(X[:, 0]) + X[:, 1] ** 2  # noqa: E731
    assert l2_relative_error(f, f, P) == 0.0
    assert l2_relative_error(lambda X: np.zeros(len(X)), f, P) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        l2_relative_error(f, lambda X: np.zeros(len(X)), P)
    assert uniform_grid([-1, -1], [1, 1]).shape == (101 * 101, 2)


def test_convection_beta20():
    res = run_convection(20.0)
    assert res["error"] <= 1e-6
    assert res["runtime"] <= 60


@pytest.mark.slow
def test_wave_point_value():
    res = run_wave(20000, keep_model=True)
    # (t, x) = (0, 0.5) sits at (-0.5, 0) in the centred square
    val = predict(res["model"], np.array([[-0.5, 0.0]]))[0]
    assert abs(val - 1.0) <= 5e-3
    assert res["error"] <= 5e-3


def test_ill_conditioning_warns(rng):
    g = FrequencyGrid.centered(2, 8, 1.0)
    M = assemble_M(g, parse_operator("d1 - d2^2", 2), Cube([1.0, 1.0]), PenaltySpec(1e-16, 1e16, 2))
    X = rng.uniform(-1, 1, (50, 2))
    with pytest.warns(IllConditionedWarning, match="relative residual"):
        model = fit(g, M, Dataset(X, np.sin(X[:, 0])))
    assert model.info["normal_residual"] > 1e-4


def test_non_positive_diagonal_is_reported():
    from pikernel.pikl import NumericalError, _hermitian_solve

    with pytest.raises(NumericalError, match="non-positive diagonal"):
        _hermitian_solve(np.diag([1.0, -1.0]).astype(complex), np.ones(2, complex))


def test_harmonic_fit_small():
    g = FrequencyGrid.centered(1, 30, np.pi)
    M = assemble_M(g, parse_operator("d1^2 + d1 + 1", 1), Cube([np.pi]), PenaltySpec(1e-5, 1.0, 2, "isotropic_power"))
    gen = datagen.gen_harmonic(2000, seed=1)
    model = fit(g, M, gen.data)
    xs = np.linspace(-np.pi, np.pi, 401)
    assert np.sqrt(np.mean((model(xs) - gen.truth(xs)) ** 2)) < 0.05
