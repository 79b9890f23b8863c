"""Sobolev-plus-PDE penalty matrices in Fourier coordinates.

For ``f_z`` on the grid, the quadratic form ``z^* M z`` equals

    sum_k sob(k) |z_k|^2 + mu * integral_Omega |D f_z|^2

so ``M = Diag(sob) + mu * Diag(P) C Diag(conj(P))`` with ``C`` the domain's
characteristic-function matrix and ``P`` the operator symbol.

With ``sobolev_mode="domain"`` the Sobolev part is also restricted to the
domain: ``lam * integral_Omega (|f|^2 + sum_{|a|=s} binom(s, a) |d^a f|^2)``,
which is ``lam * (1 + (w_a . w_b)^s) * C[a, b]``. That form is only positive
semi-definite on the grid, so a small multiple ``floor`` of the torus weights
is added back.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .diffops import LinearOperator, symbol_values
from .domains import Domain, char_matrix
from .freqgrid import FrequencyGrid

__all__ = ["PenaltySpec", "PenaltyMatrix", "sobolev_diagonal", "assemble_M", "penalty_norm"]

SOBOLEV_MODES = ("isotropic_power", "derivative_energy", "domain")


@dataclass(frozen=True)
class PenaltySpec:
    """Weights of the penalty.

    ``isotropic_power`` uses ``lam * (1 + (|k|^2 / (2L)^d)^s)`` on isotropic grids
    (``2L`` read as ``B``); ``derivative_energy`` uses
    ``lam * (1 + (sum_j (pi k_j / B_j)^2)^s)``, the Parseval weight of the
    ``s``-th derivative energy. ``domain`` integrates the same energy over the
    domain only and keeps ``floor`` times the torus weights for definiteness.
    """

    lam: float
    mu: float = 0.0
    s: int = 1
    sobolev_mode: str = "derivative_energy"
    floor: float = 1e-8

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.mu >= 0:
            raise ValueError("mu must be non-negative")
        if int(self.s) != self.s or self.s < 1:
            raise ValueError("s must be a positive integer")
        if self.sobolev_mode not in SOBOLEV_MODES:
            raise ValueError(f"sobolev_mode must be one of {SOBOLEV_MODES}")
        if self.sobolev_mode == "domain" and not self.floor > 0:
            raise ValueError("the domain Sobolev mode needs a positive floor")


@dataclass
class PenaltyMatrix:
    grid: FrequencyGrid
    matrix: np.ndarray
    spec: PenaltySpec | None = None

    @property
    def shape(self):
        return self.matrix.shape

    def hermitian_residual(self) -> float:
        A = self.matrix
        return float(np.max(np.abs(A - A.conj().T)) / max(np.max(np.abs(A)), 1e-300))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


def sobolev_diagonal(grid: FrequencyGrid, spec: PenaltySpec) -> np.ndarray:
    K = grid.enumerate().astype(float)
    if spec.sobolev_mode == "isotropic_power":
        if not grid.isotropic:
            raise ValueError("isotropic_power Sobolev weights need an isotropic grid")
        two_L = grid.B[0]
        q = np.sum(K**2, axis=1) / two_L**grid.d
    else:
        q = np.sum((np.pi * K / np.asarray(grid.B)) ** 2, axis=1)
    w = spec.lam * (1.0 + q**spec.s)
    if spec.sobolev_mode == "domain":
        w = spec.floor * w
    return w


def _domain_sobolev(grid: FrequencyGrid, spec: PenaltySpec, C: np.ndarray) -> np.ndarray:
    W = grid.frequencies(grid.enumerate())
    G = W @ W.T
    return spec.lam * (1.0 + G**spec.s) * C


def assemble_M(
    grid: FrequencyGrid,
    op: LinearOperator | None,
    domain: Domain | None,
    spec: PenaltySpec,
    C: np.ndarray | None = None,
) -> PenaltyMatrix:
    """Dense Hermitian positive definite penalty matrix."""
    diag = sobolev_diagonal(grid, spec)
    M = np.diag(diag).astype(complex)
    if spec.sobolev_mode == "domain":
        if C is None:
            if domain is None:
                raise ValueError("the domain Sobolev mode needs a domain")
            C = char_matrix(domain, grid)
        M += _domain_sobolev(grid, spec, C)
    if spec.mu > 0 and op is not None:
        if op.order > spec.s:
            raise ValueError(f"operator order {op.order} exceeds Sobolev order s={spec.s}")
        if op.is_zero:
            warnings.warn("mu > 0 with the zero operator has no effect", RuntimeWarning)
        else:
            if C is None:
                if domain is None:
                    raise ValueError("a domain is needed for the PDE term")
                C = char_matrix(domain, grid)
            P = symbol_values(op, grid)
            M += spec.mu * (P[:, None] * C * np.conj(P)[None, :])
    M = 0.5 * (M + M.conj().T)
    return PenaltyMatrix(grid, M, spec)


def penalty_norm(M: PenaltyMatrix | np.ndarray, z) -> float:
    A = M.matrix if isinstance(M, PenaltyMatrix) else np.asarray(M)
    z = np.asarray(z)
    if z.shape != (A.shape[0],):
        raise ValueError(f"coefficient length {z.shape} does not match penalty size {A.shape[0]}")
    q = np.vdot(z, A @ z)
    if abs(q.imag) > 1e-12 * max(abs(q.real), 1e-300) * 10 and abs(q.imag) > 1e-12:
        warnings.warn(f"quadratic form has imaginary part {q.imag:.3e}", RuntimeWarning)
    return float(q.real)
