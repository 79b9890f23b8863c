import numpy as np
import pytest
from scipy import integrate

from pikernel.datagen import rng_for
from pikernel.experiments import loglog_slope
from pikernel.oracle1d import Oracle1DParams, eigen_brackets, fit_exact_kernel, kernel_exact, kernel_gram


@pytest.mark.parametrize("lam,mu,L", [(1.0, 1.0, 1.0), (0.01, 1.0, np.pi), (1e-4, 10.0, 2.0), (1.0, 0.0, 1.0)])
def test_symmetry_and_positivity(lam, mu, L, rng):
    p = Oracle1DParams(lam, mu, L)
    x, y = rng.uniform(-L, L, (2, 1000))
    a, b = kernel_exact(p, x, y), kernel_exact(p, y, x)
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))
    assert np.all(kernel_exact(p, x, x) >= 0)


def test_log_branch_matches_direct():
    from pikernel.oracle1d import _kernel_direct, _kernel_log

    p = Oracle1DParams(1e-3, 1.0, 20.0)  # gamma*L about 0.63; both branches are safe
    g = p.gamma
    x, y = np.meshgrid(np.linspace(-20, 20, 9), np.linspace(-20, 20, 9))
    np.testing.assert_allclose(_kernel_log(g, p.lam, p.L, x, y), _kernel_direct(g, p.lam, p.L, x, y), rtol=1e-10)
    big = Oracle1DParams(1.0, 0.0, 100.0)  # gamma*L = 100 overflows cosh without the log form
    assert np.all(np.isfinite(kernel_exact(big, x * 5, y * 5)))


@pytest.mark.parametrize("L", [1.0, np.pi])
def test_neumann_condition(L):
    p = Oracle1DParams(0.3, 1.0, L)
    h = 1e-4
    for x in np.linspace(-0.9 * L, 0.9 * L, 7):
        for edge, s in ((L, -1), (-L, 1)):
            y0, y1, y2 = edge, edge + s * h, edge + 2 * s * h
            d = s * (-3 * kernel_exact(p, x, y0) + 4 * kernel_exact(p, x, y1) - kernel_exact(p, x, y2)) / (2 * h)
            assert abs(d) <= 1e-6


def test_weak_formulation():
    # lam int K(x,.) phi + (lam + mu) int dK(x,.) phi' = phi(x)
    lam, mu, L = 0.5, 2.0, 1.0
    p = Oracle1DParams(lam, mu, L)
    phi = lambda y: np.exp(y / 2) + y**2  # noqa: E731
    dphi = lambda y: 0.5 * np.exp(y / 2) + 2 * y  # noqa: E731
    h = 1e-6
    for x in (-0.7, 0.1, 0.55):
        K = lambda y: float(kernel_exact(p, x, y))  # noqa: E731
        dK = lambda y: (float(kernel_exact(p, x, y + h)) - float(kernel_exact(p, x, y - h))) / (2 * h)  # noqa: E731
        tot = 0.0
        for a, b in ((-L + 2 * h, x - 2 * h), (x + 2 * h, L - 2 * h)):
            tot += lam * integrate.quad(lambda y: K(y) * phi(y), a, b, epsabs=1e-12)[0]
            tot += (lam + mu) * integrate.quad(lambda y: dK(y) * dphi(y), a, b, epsabs=1e-12)[0]
        assert tot == pytest.approx(phi(x), abs=1e-4)


@pytest.mark.parametrize("n", [5, 40, 100])
def test_gram_psd(n, rng):
    p = Oracle1DParams(0.2, 1.0, 1.0)
    X = rng.uniform(-1, 1, n)
    assert np.linalg.eigvalsh(kernel_gram(p, X))[0] >= -1e-10


def test_single_point_fit():
    p = Oracle1DParams(0.5, 1.0, 1.0)
    x0, y = 0.3, 2.0
    f = fit_exact_kernel([x0], [y], p)
    xs = np.linspace(-1, 1, 7)
    expect = kernel_exact(p, xs, x0) * y / (kernel_exact(p, x0, x0) + 1)
    np.testing.assert_allclose(f(xs), expect, rtol=1e-12)


def test_domain_check():
    with pytest.raises(ValueError):
        kernel_exact(Oracle1DParams(1.0, 1.0, 1.0), 1.5, 0.0)
    with pytest.raises(ValueError):
        Oracle1DParams(0.0)


def test_brackets():
    p = Oracle1DParams(0.01, 1.0, np.pi)
    lo, hi = eigen_brackets(p, 10)
    assert lo == pytest.approx(4 / (1.01 * 196), rel=1e-14)
    assert lo == pytest.approx(0.02021, abs=1e-5)
    k = np.arange(3, 200)
    lo, hi = eigen_brackets(p, k)
    assert np.all(lo < hi)
    big = np.array([1000, 10000])
    rlo = eigen_brackets(p, 2 * big)[0] / eigen_brackets(p, big)[0]
    assert abs(rlo[1] - 0.25) < abs(rlo[0] - 0.25) < 1e-2
    with pytest.raises(ValueError):
        eigen_brackets(p, 2)


def _rate(truth_noise, ns, reps, L=1.0):
    errs = []
    xs = np.linspace(-L, L, 401)
    for n in ns:
        e = []
        for r in range(reps):
            rng = rng_for(7919 * r + n)
            X = rng.uniform(-L, L, n)
            Y = truth_noise(X, rng)
            p = Oracle1DParams(np.log(n) / n, 1 / np.log(n), L)
            f = fit_exact_kernel(X, Y, p)
            e.append(np.mean((f(xs) - truth_noise(xs, None)) ** 2))
        errs.append(np.mean(e))
    return loglog_slope(ns, errs)


NS = [10, 31, 100, 316, 1000, 3162, 10000]


@pytest.mark.slow
def test_perfect_modeling_rate():
    f = lambda X, r: 1.0 + (r.standard_normal(X.size) if r is not None else 0)  # noqa: E731
    assert _rate(f, NS, reps=5) <= -0.9


@pytest.mark.slow
def test_imperfect_modeling_rate():
    f = lambda X, r: 1.0 + 0.1 * np.abs(X) + (r.standard_normal(X.size) if r is not None else 0)  # noqa: E731
    assert _rate(f, NS, reps=5) <= -0.6
