"""Closed-form kernel for ``d = 1``, ``D = d/dx`` on ``[-L, L]``.

The kernel reproduces the norm ``lam * int f^2 + (lam + mu) * int f'^2`` on
``H^1(-L, L)``; it is the Green function of ``lam f - (lam + mu) f''`` with
Neumann conditions. Used as ground truth for the Fourier approximation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

__all__ = ["Oracle1DParams", "kernel_exact", "fit_exact_kernel", "eigen_brackets"]


@dataclass(frozen=True)
class Oracle1DParams:
    lam: float
    mu: float = 0.0
    L: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.mu >= 0:
            raise ValueError("mu must be non-negative")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def gamma(self) -> float:
        return float(np.sqrt(self.lam / (self.lam + self.mu)))


def _kernel_direct(g, lam, L, x, y):
    d = x - y
    sgn = np.where(x > y, -1.0, 1.0)
    num = (np.cosh(2 * g * L) + np.cosh(2 * g * x)) * np.cosh(g * d) + (
        sgn * np.sinh(2 * g * L) - np.sinh(2 * g * x)
    ) * np.sinh(g * d)
    return g / (2 * lam * np.sinh(2 * g * L)) * num


def _kernel_log(g, lam, L, x, y):
    # cosh(a) cosh(b) and friends expanded into exponentials, all divided by
    # exp(2 g L); every exponent below is <= 0 on the square.
    d = x - y
    sgn = np.where(x > y, -1.0, 1.0)
    e = lambda t: np.exp(g * t - 2 * g * L)  # noqa: E731
    # (cosh 2gL + cosh 2gx) cosh gd + (s sinh 2gL - sinh 2gx) sinh gd, times 4
    parts = (
        (e(2 * L + d) + e(-2 * L + d) + e(2 * x + d) + e(-2 * x + d))
        + (e(2 * L - d) + e(-2 * L - d) + e(2 * x - d) + e(-2 * x - d))
        + sgn * (e(2 * L + d) - e(-2 * L + d) - e(2 * L - d) + e(-2 * L - d))
        - (e(2 * x + d) - e(-2 * x + d) - e(2 * x - d) + e(-2 * x - d))
    )
    denom = 1.0 - np.exp(-4 * g * L)  # sinh(2gL) * 2 / exp(2gL)
    return g / (2 * lam) * parts / (2.0 * denom)


def kernel_exact(p: Oracle1DParams, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tol = 1e-12 * p.L
    if np.any(np.abs(x) > p.L + tol) or np.any(np.abs(y) > p.L + tol):
        raise ValueError(f"arguments must lie in [-{p.L}, {p.L}]")
    g = p.gamma
    if g * p.L > 30:
        out = _kernel_log(g, p.lam, p.L, x, y)
    else:
        out = _kernel_direct(g, p.lam, p.L, x, y)
    return out


def kernel_gram(p: Oracle1DParams, X, Y=None) -> np.ndarray:
    X = np.asarray(X, dtype=float).reshape(-1)
    Y = X if Y is None else np.asarray(Y, dtype=float).reshape(-1)
    return kernel_exact(p, X[:, None], Y[None, :])


def fit_exact_kernel(X, Y, p: Oracle1DParams):
    """Kernel ridge predictor ``x -> K(x, X) (K + n I)^{-1} Y``."""
    X = np.asarray(X, dtype=float).reshape(-1)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    n = X.size
    if n < 1:
        raise ValueError("need at least one point")
    K = kernel_gram(p, X)
    A = K + n * np.eye(n)
    try:
        cf = linalg.cho_factor(A, lower=True)
        alpha = linalg.cho_solve(cf, Y)
    except linalg.LinAlgError:
        raise np.linalg.LinAlgError(f"kernel system is singular (cond ~ {np.linalg.cond(A):.3e})") from None

    def predictor(x):
        x = np.asarray(x, dtype=float).reshape(-1)
        return kernel_gram(p, x, X) @ alpha

    return predictor


def eigen_brackets(p: Oracle1DParams, k) -> tuple:
    """``4L^2 / ((lam + mu) (k + 4)^2 pi^2) <= a_k <= 4L^2 / ((lam + mu) (k - 2)^2 pi^2)``."""
    k = np.asarray(k)
    if np.any(k < 3):
        raise ValueError("brackets hold for k >= 3")
    c = 4 * p.L**2 / ((p.lam + p.mu) * np.pi**2)
    return c / (k + 4.0) ** 2, c / (k - 2.0) ** 2
