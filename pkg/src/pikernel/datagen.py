"""Seeded synthetic data for the experiments shipped with the package.

All generators draw from ``numpy.random.Philox`` (a counter-based generator)
seeded with a 64-bit integer, so a (parameters, seed) pair fixes the data.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .pikl import Dataset

__all__ = [
    "rng_for",
    "Generated",
    "harmonic_truth",
    "harmonic_basis",
    "harmonic_residual",
    "heat4d_residual",
    "wave_taylor_row",
    "gen_harmonic",
    "heat_truth",
    "heat_residual",
    "gen_heat_hybrid",
    "wave_truth",
    "gen_wave_boundary",
    "convection_truth",
    "gen_convection",
    "heat4d_truth",
    "gen_heat4d",
    "in_heat4d_boundary",
    "HierToy",
    "gen_hier_toy",
    "gen_additive",
    "gen_online",
    "hier_toy_long",
    "write_csv",
]


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass
class Generated:
    data: Dataset
    truth: Callable
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# harmonic oscillator  f'' + f' + f = 0 on [-pi, pi]


def harmonic_basis():
    r = np.sqrt(3.0) / 2
    f1 = lambda x: np.exp(-np.asarray(x) / 2) * np.cos(r * np.asarray(x))  # noqa: E731
    f2 = lambda x: np.exp(-np.asarray(x) / 2) * np.sin(r * np.asarray(x))  # noqa: E731
    return f1, f2


def harmonic_truth(P):
    P = np.asarray(P, dtype=float)
    x = P[:, 0] if P.ndim == 2 else P
    return harmonic_basis()[0](x)


def harmonic_residual(x):
    """``f'' + f' + f`` of the truth, from its analytic derivatives."""
    x = np.asarray(x, dtype=float)
    r = np.sqrt(3.0) / 2
    e = np.exp(-x / 2)
    c, s = np.cos(r * x), np.sin(r * x)
    f = e * c
    d1 = e * (-0.5 * c - r * s)
    d2 = e * ((0.25 - r * r) * c + r * s)
    return d2 + d1 + f


def gen_harmonic(n: int, seed: int = 0, sigma: float = 0.5) -> Generated:
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng_for(seed)
    X = rng.uniform(-np.pi, np.pi, n)
    Y = harmonic_truth(X) + sigma * rng.standard_normal(n)
    return Generated(Dataset(X[:, None], Y), harmonic_truth, {"basis": harmonic_basis(), "sigma": sigma})


# ---------------------------------------------------------------------------
# heat equation prior  d_t f - d_xx f  with an imperfect truth on [-pi, pi]^2


def heat_truth(P):
    P = np.asarray(P, dtype=float)
    return np.exp(-P[:, 0]) * np.cos(P[:, 1]) + 0.5 * np.sin(2 * P[:, 1])


def heat_residual(P):
    """``(d_t - d_xx) f*`` evaluated analytically; equals ``2 sin(2x)``."""
    P = np.asarray(P, dtype=float)
    return 2.0 * np.sin(2 * P[:, 1])


HEAT_MODELING_ERROR = 8 * np.pi**2  # integral of (2 sin 2x)^2 over the square


def gen_heat_hybrid(n: int, seed: int = 0, sigma: float = 0.5) -> Generated:
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng_for(seed)
    X = rng.uniform(-np.pi, np.pi, (n, 2))
    Y = heat_truth(X) + sigma * rng.standard_normal(n)
    return Generated(Dataset(X, Y), heat_truth, {"modeling_error": HEAT_MODELING_ERROR, "sigma": sigma})


# ---------------------------------------------------------------------------
# wave equation  f_tt = 4 f_xx on [0, 1]^2


def wave_truth(P, centered: bool = False):
    P = np.asarray(P, dtype=float)
    t, x = P[:, 0], P[:, 1]
    if centered:
        t, x = t + 0.5, x + 0.5
    return np.sin(np.pi * x) * np.cos(2 * np.pi * t) + np.sin(4 * np.pi * x) * np.cos(8 * np.pi * t) / 2


def wave_taylor_row(U, n):
    """Values on the line ``t = 1/n`` from a second-order Taylor step in time."""
    U = np.asarray(U, dtype=float)
    return (1 - 2 * np.pi**2 / n**2) * np.sin(np.pi * U) + (0.5 - 16 * np.pi**2 / n**2) * np.sin(4 * np.pi * U)


def gen_wave_boundary(n: int, sigma: float = 0.0, seed: int = 0, centered: bool = False) -> Generated:
    """Initial line, two Dirichlet lines and the Taylor line, a quarter of ``n`` each.

    Points are ``(t, x)``; with ``centered`` they are shifted by ``-1/2`` so the
    square becomes ``[-1/2, 1/2]^2``.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    rng = rng_for(seed)
    q = n // 4
    r = n - 3 * q
    U0, U1, U2, U3 = (rng.uniform(size=k) for k in (q, q, q, r))
    X = np.vstack(
        [
            np.column_stack([np.zeros(q), U0]),
            np.column_stack([U1, np.zeros(q)]),
            np.column_stack([U2, np.ones(q)]),
            np.column_stack([np.full(r, 1.0 / n), U3]),
        ]
    )
    Y = np.concatenate(
        [np.sin(np.pi * U0) + np.sin(4 * np.pi * U0) / 2, np.zeros(q), np.zeros(q), wave_taylor_row(U3, n)]
    )
    if sigma > 0:
        Y = Y + sigma * rng.standard_normal(n)
    if centered:
        X = X - 0.5
    truth = (lambda P: wave_truth(P, True)) if centered else wave_truth
    return Generated(Dataset(X, Y), truth, {"groups": (q, q, q, r), "sigma": sigma, "centered": centered})


# ---------------------------------------------------------------------------
# convection  d_t f + beta d_x f = 0, initial line only


def convection_truth(beta: float):
    """Solution on ``[-1/2, 1/2] x [-pi, pi]`` (time shifted by 1/2)."""

    def f(P):
        P = np.asarray(P, dtype=float)
        return np.sin(P[:, 1] + np.pi - beta * (P[:, 0] + 0.5))

    return f


def gen_convection(n: int, beta: float, seed: int = 0) -> Generated:
    """``n`` samples of the initial profile ``sin(x)`` at ``t = -1/2``."""
    rng = rng_for(seed)
    U = rng.uniform(size=n)
    X = np.column_stack([np.full(n, -0.5), 2 * np.pi * U - np.pi])
    Y = np.sin(2 * np.pi * U)
    return Generated(Dataset(X, Y), convection_truth(beta), {"beta": beta})


# ---------------------------------------------------------------------------
# heat equation in dimension 4 with noisy boundary data


def heat4d_truth(P):
    P = np.asarray(P, dtype=float)
    return np.exp(-3 * P[:, 0] / np.pi**2) * np.prod(np.cos(P[:, 1:] / np.pi), axis=1)


def heat4d_residual(P):
    """``(d_1 - d_22 - d_33 - d_44) f*`` from analytic derivatives."""
    f = heat4d_truth(P)
    return -3 / np.pi**2 * f - 3 * (-f / np.pi**2)


def gen_heat4d(n: int, seed: int = 0, sigma: float = 0.1) -> Generated:
    """Points on ``{0} x cube^3`` (probability 1/7) or on ``[-1/2, 1/2] x boundary(cube^3)``."""
    rng = rng_for(seed)
    X = rng.uniform(-0.5, 0.5, (n, 4))
    init = rng.uniform(size=n) < 1.0 / 7.0
    X[init, 0] = 0.0
    idx = np.flatnonzero(~init)
    face = rng.integers(1, 4, size=idx.size)
    side = rng.choice([-0.5, 0.5], size=idx.size)
    X[idx, face] = side
    Y = heat4d_truth(X) + sigma * rng.standard_normal(n)
    return Generated(Dataset(X, Y), heat4d_truth, {"sigma": sigma})


def in_heat4d_boundary(X, tol: float = 1e-12) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    inside = np.all(np.abs(X) <= 0.5 + tol, axis=1)
    on_init = np.abs(X[:, 0]) <= tol
    on_side = np.any(np.abs(np.abs(X[:, 1:]) - 0.5) <= tol, axis=1)
    return inside & (on_init | on_side)


# ---------------------------------------------------------------------------
# hierarchical toy: two bottom series and their sum


@dataclass
class HierToy:
    X1: np.ndarray
    X2: np.ndarray
    Y: np.ndarray  # columns (Y1, Y2, Y1 + Y2)
    X1_test: np.ndarray
    X2_test: np.ndarray
    Y_test: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    sigma1: float
    sigma2: float

    @property
    def S(self) -> np.ndarray:
        """Summation matrix with bottom nodes first: rows Y1, Y2, Y1 + Y2."""
        return np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])

    @property
    def S_sum_first(self) -> np.ndarray:
        """Same hierarchy with the aggregate listed first."""
        return np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])


def gen_hier_toy(d: int, n_train: int, n_test: int, sigma2: float, seed: int = 0, sigma1: float = 1.0) -> HierToy:
    rng = rng_for(seed)
    n = n_train + n_test
    th1 = rng.standard_normal(d)
    th2 = rng.standard_normal(d)
    X1 = rng.standard_normal((n, d))
    X2 = rng.standard_normal((n, d))
    e1 = sigma1 * rng.standard_normal(n)
    e2 = sigma2 * rng.standard_normal(n)
    Y1 = X1 @ th1 + e1
    Y2 = X2 @ th2 - e1 + e2
    Y = np.column_stack([Y1, Y2, Y1 + Y2])
    tr, te = slice(0, n_train), slice(n_train, n)
    return HierToy(X1[tr], X2[tr], Y[tr], X1[te], X2[te], Y[te], th1, th2, sigma1, sigma2)


# ---------------------------------------------------------------------------
# additive model with known effects, for tuning checks


def gen_additive(n: int, seed: int = 0, sigma: float = 0.3):
    """``Y = sin(2 x1) + 0.5 x2 + noise`` with ``x1, x2`` uniform on ``[-pi, pi]``."""
    rng = rng_for(seed)
    X = rng.uniform(-np.pi, np.pi, (n, 2))
    truth = lambda P: np.sin(2 * np.asarray(P)[:, 0]) + 0.5 * np.asarray(P)[:, 1]  # noqa: E731
    Y = truth(X) + sigma * rng.standard_normal(n)
    return Generated(Dataset(X, Y), truth, {"sigma": sigma})


def gen_online(n: int, seed: int = 0, sigma: float = 0.2) -> dict:
    """Drifting target for online corrections and expert combinations.

    ``g1 = sin(x1)`` and ``g2 = 0.5 x2`` are effects fitted offline; the target
    reweights ``g1`` and shifts slowly over the index ``t``. Two experts see
    the target with a drifting bias and with extra noise respectively.
    """
    rng = rng_for(seed)
    t = np.arange(n, dtype=float)
    u = t / max(n - 1, 1)
    x1 = rng.uniform(-np.pi, np.pi, n)
    x2 = rng.uniform(-1.0, 1.0, n)
    g1, g2 = np.sin(x1), 0.5 * x2
    truth = (1.0 + 0.5 * np.sin(2 * np.pi * u)) * g1 + g2 + 0.3 * u
    y = truth + sigma * rng.standard_normal(n)
    e1 = truth + 0.4 * (u - 0.5)
    e2 = truth + 2 * sigma * rng.standard_normal(n)
    return {"t": t, "y": y, "g1": g1, "g2": g2, "expert1": e1, "expert2": e2}


def hier_toy_long(toy: "HierToy"):
    """Long-format rows (node, t, y, x1..xd) and (node, parent) pairs of a toy draw.

    Bottom node ``y1`` carries the ``X1`` features, ``y2`` the ``X2`` features and
    the aggregate ``total`` both blocks; training rows come first.
    """
    X1 = np.vstack([toy.X1, toy.X1_test])
    X2 = np.vstack([toy.X2, toy.X2_test])
    Y = np.vstack([toy.Y, toy.Y_test])
    n, d = X1.shape
    feats = {"y1": np.hstack([X1, np.zeros_like(X2)]), "y2": np.hstack([np.zeros_like(X1), X2]),
             "total": np.hstack([X1, X2])}
    cols = {"node": [], "t": [], "y": []}
    cols.update({f"x{j + 1}": [] for j in range(2 * d)})
    for i, node in enumerate(("y1", "y2", "total")):
        cols["node"] += [node] * n
        cols["t"] += list(range(n))
        cols["y"] += Y[:, i].tolist()
        for j in range(2 * d):
            cols[f"x{j + 1}"] += feats[node][:, j].tolist()
    return cols, [("y1", "total"), ("y2", "total"), ("total", None)]


def write_csv(data: Dataset, path, names=None) -> None:
    d = data.X.shape[1]
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["y"])
        for row, y in zip(data.X, data.Y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(y))])
