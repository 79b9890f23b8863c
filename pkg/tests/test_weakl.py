import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pikernel import datagen
from pikernel.acceptance import constrained_error, constrained_instance
from pikernel.diffops import parse_operator
from pikernel.domains import Cube
from pikernel.experiments import hier_toy_draw, run_hier_toy
from pikernel.freqgrid import FrequencyGrid
from pikernel.penalty import PenaltySpec, assemble_M
from pikernel.pikl import Dataset, fit
from pikernel.weakl import (
    Categorical,
    Fourier,
    Linear,
    Rescaler,
    SummationMatrix,
    WeaKLError,
    additive_fit,
    combine_forecasts,
    constraint_projector,
    fourier_map,
    hier_bu,
    hier_global,
    hier_transfer,
    ols_infeasible,
    online_fit,
    solve,
    weakl_gradient,
    weakl_risk,
)


def _fd(f, th, h=1e-6):
    g = np.zeros(th.size, complex)
    for k in range(th.size):
        e = np.zeros(th.size, complex)
        e[k] = h
        g[k] = (f(th + e) - f(th - e)) / (2 * h)
        e[k] = 1j * h
        g[k] += 1j * (f(th + e) - f(th - e)) / (2 * h)
    return g


# ---------------------------------------------------------------------------
# generic solver


def test_ridge_limit_is_ols(rng):
    X = rng.standard_normal((200, 4))
    Y = X @ np.array([1.0, -2.0, 0.5, 3.0]) + 0.1 * rng.standard_normal(200)
    th = solve(X, Y, Lam=[1.0], M=1e-8 * np.eye(4)).theta
    np.testing.assert_allclose(th.real, np.linalg.lstsq(X, Y, rcond=None)[0], atol=1e-5)


def test_single_fourier_block_matches_pikl(rng):
    g = FrequencyGrid.centered(2, 3, 1.0)
    M = assemble_M(g, parse_operator("d1 - d2^2", 2), Cube([1.0, 1.0]), PenaltySpec(1e-2, 0.5, 2))
    X = rng.uniform(-1, 1, (80, 2))
    Y = np.sin(X[:, 0] + X[:, 1]) + 0.1 * rng.standard_normal(80)
    th = solve(g.design_matrix(X), Y, Lam=[1.0], MtM=M.matrix).theta
    ref = fit(g, M, Dataset(X, Y)).theta
    Xt = rng.uniform(-1, 1, (50, 2))
    a, b = g.evaluate(th, Xt).real, g.evaluate(ref, Xt).real
    assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(b)


def test_gradient_and_stationarity(rng):
    n, d2, D = 40, 3, 6
    Phi = rng.standard_normal((n, d2, D)) + 1j * rng.standard_normal((n, d2, D))
    Y = rng.standard_normal((n, d2))
    Lam = [1.0, 0.5, 2.0]
    M = rng.standard_normal((D, D)) + 2 * np.eye(D)
    risk = lambda t: weakl_risk(Phi, Y, t, Lam, M=M)  # noqa: E731
    th = rng.standard_normal(D) + 1j * rng.standard_normal(D)
    ga = weakl_gradient(Phi, Y, th, Lam, M=M)
    np.testing.assert_allclose(_fd(risk, th), ga, rtol=1e-5, atol=1e-7)
    hat = solve(Phi, Y, Lam, M=M).theta
    assert np.linalg.norm(weakl_gradient(Phi, Y, hat, Lam, M=M)) <= 1e-8


def test_solve_validation(rng):
    with pytest.raises(WeaKLError):
        solve(np.zeros((5, 2, 3)), np.zeros((5, 3)))
    with pytest.raises(WeaKLError):
        solve(np.zeros((5, 3)), np.zeros(5), Lam=[1.0, 2.0])
    with pytest.raises(np.linalg.LinAlgError, match="condition"):
        solve(np.zeros((5, 3)), np.zeros(5))


def test_uniqueness_under_reordering(rng):
    n, d2, D = 60, 2, 5
    Phi = rng.standard_normal((n, d2, D))
    Y = rng.standard_normal((n, d2))
    M = np.eye(D) * 0.1
    a = solve(Phi, Y, [1.0, 2.0], M=M).theta
    p = rng.permutation(n)
    b = solve(Phi[p], Y[p], [1.0, 2.0], M=M).theta
    assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(a)


def test_complexity_envelope(rng):
    def t(D):
        Phi = rng.standard_normal((2 * D, D))
        Y = rng.standard_normal(2 * D)
        start = time.perf_counter()
        for _ in range(3):
            solve(Phi, Y, M=np.eye(D))
        return time.perf_counter() - start

    t(100)
    small, big = t(200), t(400)
    assert big <= 8 * small * 4  # cubic with a generous allowance for timer noise


# ---------------------------------------------------------------------------
# feature blocks and additive models


def test_rescaler_and_fourier_map():
    r = Rescaler.fit([2.0, 4.0, 3.0])
    np.testing.assert_allclose(r([2.0, 3.0, 4.0]), [-np.pi, 0.0, np.pi])
    with pytest.warns(RuntimeWarning):
        assert r([5.0])[0] == np.pi
    F = fourier_map([0.0, np.pi], 2)
    assert F.shape == (2, 5)
    np.testing.assert_allclose(F[0], 1.0)
    np.testing.assert_allclose(F[1], np.exp(0.5j * np.pi * np.arange(-2, 3)))


def test_linear_recovery(rng):
    X = rng.uniform(-1, 1, (500, 1))
    Y = 3 * X[:, 0] + 0.2 * rng.standard_normal(500)
    model = additive_fit([Linear()], X, Y, [1e-6])
    assert model.theta[0].real == pytest.approx(3.0, abs=0.1)


def test_categorical_means(rng):
    card = 7
    cats = np.repeat(np.arange(card), 40)
    Y = rng.standard_normal(cats.size) + cats * 0.5
    model = additive_fit([Categorical(card)], cats[:, None], Y, [1e-12])
    means = np.array([Y[cats == c].mean() for c in range(card)])
    np.testing.assert_allclose(model.effect(0, np.arange(card)), means, atol=1e-4)
    with pytest.raises(WeaKLError):
        Categorical(3).features(np.array([3]))


def test_two_feature_additive_oos():
    gen = datagen.gen_additive(4000, seed=3)
    X, Y = gen.data.X, gen.data.Y
    model = additive_fit([Fourier(m=6, s=2), Linear()], X[:2000], Y[:2000], [1e-4, 1e-6])
    mse = np.mean((model(X[2000:]) - Y[2000:]) ** 2)
    assert mse <= 2 * 0.3**2
    xs = np.linspace(-2.5, 2.5, 50)
    eff = model.effect(0, xs) + model.effect(1, np.zeros(50))
    assert np.max(np.abs(eff - eff.mean() - (np.sin(2 * xs) - np.sin(2 * xs).mean()))) < 0.15


def test_additive_validation():
    with pytest.raises(WeaKLError):
        additive_fit([Linear()], np.zeros((3, 1)), np.zeros(3), [0.0])


# ---------------------------------------------------------------------------
# online corrections and combinations


def _online_data(rng, n=400):
    t = np.arange(n, dtype=float)
    X = np.column_stack([rng.uniform(-np.pi, np.pi, n), rng.uniform(-1, 1, n)])
    effects = [np.sin, lambda x: 0.5 * x]
    g = np.column_stack([f(X[:, j]) for j, f in enumerate(effects)])
    return t, X, effects, g


def test_online_exact_target(rng):
    t, X, effects, g = _online_data(rng)
    model = online_fit(effects, t, X, g.sum(axis=1), [1.0, 1.0, 1.0])
    assert np.max(np.abs(model.theta)) < 1e-12
    np.testing.assert_allclose(model.predict(t, X), g.sum(axis=1), atol=1e-12)


def test_online_multiplicative_break(rng):
    t, X, effects, g = _online_data(rng)
    Y = 0.9 * g.sum(axis=1)
    model = online_fit(effects, t, X, Y, [1e-6, 1e-6, 1e-6], m=2)
    H = model.corrections(t)
    assert np.max(np.abs(1 + H[:, 1:] - 0.9)) <= 0.03


def test_online_infinite_penalty_offsets_only(rng):
    t, X, effects, g = _online_data(rng)
    Y = g.sum(axis=1) + 0.3 + 0.1 * rng.standard_normal(t.size)
    model = online_fit(effects, t, X, Y, [1e-3, 1e12, 1e12])
    H = model.corrections(t)
    assert np.max(np.abs(H[:, 1:])) < 1e-6
    assert np.mean(H[:, 0]) == pytest.approx(0.3, abs=0.05)


def test_combine_single_perfect_expert(rng):
    t = np.arange(200.0)
    y = np.sin(t / 10)
    c = combine_forecasts(y[:, None], y, t, [1.0])
    np.testing.assert_allclose(c.weights(t), 1.0, atol=1e-10)


def test_combine_exact_vs_noise(rng):
    t = np.arange(500.0)
    y = np.sin(t / 20) * 2
    E = np.column_stack([y, rng.standard_normal(500)])
    c = combine_forecasts(E, y, t, [1e-6, 1e-6])
    assert np.mean(c.weights(t)[:, 0]) >= 0.9


def test_combine_infinite_penalty_uniform(rng):
    t = np.arange(100.0)
    E = rng.standard_normal((100, 3))
    c = combine_forecasts(E, rng.standard_normal(100), t, [1e12] * 3)
    np.testing.assert_allclose(c.weights(t), 1 / 3, atol=1e-8)


# ---------------------------------------------------------------------------
# constraints


def test_projector_first_basis_vector():
    e1 = np.zeros(4)
    e1[0] = 1
    np.testing.assert_allclose(constraint_projector(e1), np.diag([0.0, 1.0, 1.0, 1.0]), atol=1e-15)
    with pytest.raises(WeaKLError):
        constraint_projector(np.zeros((3, 1)))


@given(seed=st.integers(0, 10**6), D=st.integers(2, 50), data=st.data())
def test_projector_structure(seed, D, data):
    r = np.random.default_rng(seed)
    k = data.draw(st.integers(1, D - 1))
    P = r.standard_normal((D, k)) + 1j * r.standard_normal((D, k))
    C = constraint_projector(P)
    assert np.max(np.abs(C @ C - C)) <= 1e-12
    assert np.max(np.abs(C - C.conj().T)) <= 1e-12


def test_transfer_projector_kernel(rng):
    D, J = 3, 4
    P = np.vstack([np.eye(D)] * J)
    C = constraint_projector(P)
    equal = np.tile(rng.standard_normal(D), J)
    assert np.max(np.abs(C @ equal)) < 1e-12
    unequal = rng.standard_normal(D * J)
    assert np.linalg.norm(C @ unequal) > 1e-3


def test_constrained_dominance_instances():
    rng = datagen.rng_for(2024)
    for _ in range(100):
        Phi, Y, Lam, M, C, lam, th_star = constrained_instance(rng)
        th = solve(Phi, Y, Lam, M=M).theta
        th_c = solve(Phi, Y, Lam, M=np.vstack([np.sqrt(lam) * C, M])).theta
        assert constrained_error(Phi, th_star, th_c, Lam, M) <= constrained_error(Phi, th_star, th, Lam, M) * (1 + 1e-10)


def test_dominance_equality_when_already_constrained(rng):
    n, D = 30, 4
    Phi = rng.standard_normal((n, 1, D))
    C = np.array([[1.0, -1.0, 0.0, 0.0]])
    theta = np.array([1.0, 1.0, -0.5, 2.0])
    Y = np.einsum("tkd,d->tk", Phi, theta)  # noiseless; unconstrained fit already satisfies C
    M = 1e-9 * np.eye(D)
    th_u = solve(Phi, Y, M=M).theta
    th_c = solve(Phi, Y, M=np.vstack([10.0 * C, M])).theta
    e_u = constrained_error(Phi, theta, th_u, [1.0], M)
    e_c = constrained_error(Phi, theta, th_c, [1.0], M)
    assert e_c == pytest.approx(e_u, rel=1e-6, abs=1e-20)


def test_exact_constraint_equivalence(rng):
    n, D = 50, 6
    Phi = rng.standard_normal((n, D))
    Y = rng.standard_normal(n)
    M = 0.1 * np.eye(D)
    P = np.vstack([np.eye(3)] * 2)  # theta = P beta: the two halves agree
    beta = solve(Phi @ P, Y, MtM=P.T @ M.T @ M @ P).theta
    C = constraint_projector(P)
    soft = solve(Phi, Y, M=np.vstack([1e5 * C, M])).theta
    assert np.linalg.norm(P @ beta - soft) <= 1e-5 * np.linalg.norm(soft)


# ---------------------------------------------------------------------------
# hierarchies


def _hier(rng, n=120, D=3):
    S = SummationMatrix.from_parents([2, 2, None], 2)
    X = [rng.standard_normal((n, D)) for _ in range(2)]
    th = [rng.standard_normal(D) for _ in range(2)]
    Yb = np.column_stack([X[0] @ th[0], X[1] @ th[1]]) + 0.3 * rng.standard_normal((n, 2))
    return S, X, Yb @ S.S.T


def test_summation_matrix():
    S = SummationMatrix.from_parents([2, 2, None], 2)
    np.testing.assert_array_equal(S.S, [[1, 0], [0, 1], [1, 1]])
    with pytest.raises(WeaKLError):
        SummationMatrix(np.array([[1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(WeaKLError):
        SummationMatrix.from_parents([1, 0], 2)


def test_bu_with_zero_upper_weight_is_independent(rng):
    S, X, Y = _hier(rng)
    D = X[0].shape[1]
    fitb = hier_bu(S, X, Y, [1.0, 1.0, 0.0], MtM=1e-10 * np.eye(2 * D))
    for a in range(2):
        ols = np.linalg.lstsq(X[a], Y[:, a], rcond=None)[0]
        np.testing.assert_allclose(fitb.theta[a * D:(a + 1) * D].real, ols, atol=1e-6)


def test_toy_ordering_small():
    res = run_hier_toy(d=20, sigmas=(0.1, 0.5, 1.0), reps=100)
    for row in res["rows"]:
        assert row["weakl"] <= row["bu"]


@pytest.mark.slow
def test_toy_ordering_overparameterized():
    res = run_hier_toy(d=38, sigmas=(0.2, 0.6, 1.0), reps=200)
    assert res["rec_infeasible"]
    assert all(r["weakl"] <= r["bu"] for r in res["rows"])
    assert ols_infeasible(80, 76) and not ols_infeasible(80, 40)


def test_global_zero_gamma_is_independent(rng):
    S, Xb, Y = _hier(rng)
    X = Xb + [np.hstack(Xb)]
    fitg = hier_global(S, X, Y, 0.0, MtM=1e-12 * np.eye(sum(x.shape[1] for x in X)))
    st = np.cumsum([0] + [x.shape[1] for x in X])
    for a in range(3):
        ols = np.linalg.lstsq(X[a], Y[:, a], rcond=None)[0]
        np.testing.assert_allclose(fitg.theta[st[a]:st[a + 1]].real, ols, atol=1e-6)


def test_global_coherence_sweep(rng):
    S, Xb, Y = _hier(rng)
    Y = Y + 0.5 * rng.standard_normal(Y.shape)  # make the raw targets incoherent
    X = Xb + [np.hstack(Xb)]
    dim = sum(x.shape[1] for x in X)
    res = []
    for gam in (0.0, 1.0, 10.0, 100.0, 1000.0):
        P = hier_global(S, X, Y, gam, MtM=1e-6 * np.eye(dim)).predict(X)
        res.append(np.linalg.norm(P[:, :2] @ S.S.T - P))
    assert all(b <= a for a, b in zip(res, res[1:]))
    assert res[-1] < 1e-3 * res[0]


def test_global_stationarity(rng):
    S, Xb, Y = _hier(rng, n=40, D=2)
    X = Xb + [np.hstack(Xb)]
    dim = sum(x.shape[1] for x in X)
    gam = np.array([0.5, 1.0, 2.0])
    MtM = 0.01 * np.eye(dim)
    th = hier_global(S, X, Y, gam, MtM=MtM).theta
    st_ = np.cumsum([0] + [x.shape[1] for x in X])
    Pb = np.hstack([np.eye(2), np.zeros((2, 1))])
    E = S.S @ Pb - np.eye(3)

    def risk(t):
        F = np.column_stack([X[a] @ t[st_[a]:st_[a + 1]] for a in range(3)])
        r = np.sum(np.abs(F - Y) ** 2, axis=1) + np.sum(np.abs((F @ E.T) * gam) ** 2, axis=1)
        return float(np.mean(r) + np.vdot(t, MtM @ t).real)

    g0 = np.linalg.norm(_fd(risk, np.zeros(dim, complex)))
    assert np.linalg.norm(_fd(risk, th.astype(complex))) <= 1e-5 * g0


def test_transfer_limits(rng):
    S, X, Y = _hier(rng)
    D = X[0].shape[1]
    MtM = 1e-6 * np.eye(2 * D)
    tied = hier_transfer(S, X, Y, [1.0, 1.0, 1.0], J=[0, 1], lam=1e9, MtM=MtM).theta
    assert np.max(np.abs(tied[:D] - tied[D:])) <= 1e-6
    free = hier_transfer(S, X, Y, [1.0, 1.0, 1.0], J=[0, 1], lam=0.0, MtM=MtM).theta
    bu = hier_bu(S, X, Y, [1.0, 1.0, 1.0], MtM=MtM).theta
    np.testing.assert_array_equal(free, bu)


def test_hier_validation(rng):
    S, X, Y = _hier(rng)
    with pytest.raises(WeaKLError):
        hier_bu(S, X[:1], Y, 1.0)
    with pytest.raises(WeaKLError):
        hier_bu(S, X, Y, np.array([[1.0, 0.5, 0], [0, 1, 0], [0, 0, 1]]))
    with pytest.raises(WeaKLError):
        hier_transfer(S, X, Y, 1.0, J=[0, 1], lam=-1.0)


def test_toy_draw_keys():
    res = hier_toy_draw(datagen.gen_hier_toy(5, 40, 10, 0.5, seed=0))
    assert set(res) == {"bu", "rec", "mint", "weakl"}
    assert all(v > 0 for v in res.values())
