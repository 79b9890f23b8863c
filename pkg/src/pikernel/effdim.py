"""Effective dimension from the spectrum of ``C M^{-1} C``.

``C M^{-1} C = A^* A`` with ``A = M^{-1/2} C``, so its eigenvalues are the
squared singular values of ``A``; this keeps them real and non-negative in
floating point.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .diffops import LinearOperator
from .domains import Domain, char_matrix
from .freqgrid import FrequencyGrid
from .penalty import PenaltyMatrix, PenaltySpec, assemble_M

__all__ = [
    "EffDimReport",
    "spectrum",
    "spectrum_direct",
    "effective_dimension",
    "effdim_curve",
    "default_schedule",
    "write_curve_csv",
    "CUTOFF",
]

CUTOFF = 1e-14


@dataclass
class EffDimReport:
    eigenvalues: np.ndarray
    N: float
    params: dict = field(default_factory=dict)


def _as_array(M):
    return M.matrix if isinstance(M, PenaltyMatrix) else np.asarray(M)


def inverse_sqrt(M) -> np.ndarray:
    A = _as_array(M)
    w, V = linalg.eigh(0.5 * (A + A.conj().T))
    if w[0] <= 0:
        raise linalg.LinAlgError(f"penalty matrix is not positive definite (min eigenvalue {w[0]:.3e})")
    return (V / np.sqrt(w)) @ V.conj().T


def spectrum(C, M) -> np.ndarray:
    """Descending eigenvalues of ``C M^{-1} C``; values below ``CUTOFF * max`` are zeroed."""
    C = np.asarray(C)
    Mi = inverse_sqrt(M)
    if Mi.shape != C.shape:
        raise ValueError("C and M sizes differ")
    sv = linalg.svd(Mi @ C, compute_uv=False)
    ev = np.sort(sv**2)[::-1]
    if ev.size and ev[0] > 0:
        ev[ev < CUTOFF * ev[0]] = 0.0
    return ev


def spectrum_direct(C, M) -> np.ndarray:
    """Same spectrum by a dense Hermitian eigensolve of ``C M^{-1} C`` (cross-check route)."""
    C = np.asarray(C)
    A = _as_array(M)
    B = C @ linalg.solve(A, C, assume_a="her")
    B = 0.5 * (B + B.conj().T)
    ev = np.sort(linalg.eigvalsh(B))[::-1]
    return np.clip(ev, 0.0, None)


def effective_dimension(eigs, kappa: float = 1.0, tol: float = 1e-10) -> float:
    """``sum 1 / (1 + 1/(kappa a))`` over the positive eigenvalues ``a``."""
    a = np.asarray(eigs, dtype=float)
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.any(a < -tol * scale):
        raise ValueError(f"negative eigenvalue {a.min():.3e} in spectrum")
    a = a[a > 0]
    ka = kappa * a
    return float(np.sum(ka / (1.0 + ka)))


def default_schedule(n: int) -> tuple[float, float]:
    """``(log(n)/n, 1/log(n))``."""
    return math.log(n) / n, 1.0 / math.log(n)


def effdim_curve(
    grid: FrequencyGrid,
    op: LinearOperator | None,
    domain: Domain,
    n_grid: Sequence[int],
    s: int = 1,
    schedule: Callable[[int], tuple[float, float]] = default_schedule,
    sobolev_mode: str = "derivative_energy",
    kappa: float = 1.0,
) -> list[EffDimReport]:
    C = char_matrix(domain, grid)
    out = []
    for n in n_grid:
        lam, mu = schedule(int(n))
        M = assemble_M(grid, op, domain, PenaltySpec(lam, mu, s, sobolev_mode), C=C)
        ev = spectrum(C, M)
        N = effective_dimension(ev, kappa)
        out.append(EffDimReport(ev, N, {"n": int(n), "lambda": lam, "mu": mu, "m": grid.m, "kappa": kappa}))
    return out


def curve_slope(reports: Sequence[EffDimReport]) -> float:
    n = np.array([r.params["n"] for r in reports], dtype=float)
    N = np.array([r.N for r in reports])
    return float(np.polyfit(np.log(n), np.log(N), 1)[0])


def write_curve_csv(reports: Sequence[EffDimReport], path, top: int = 20) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "lambda", "mu", "m", "N"] + [f"eig{i + 1}" for i in range(top)])
        for r in reports:
            p = r.params
            eigs = list(r.eigenvalues[:top]) + [""] * max(0, top - len(r.eigenvalues))
            w.writerow([p["n"], p["lambda"], p["mu"], p["m"], r.N] + eigs)
