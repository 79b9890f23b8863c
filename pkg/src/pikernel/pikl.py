"""Physics-informed kernel learning: closed-form penalized least squares.

The estimator minimizes

    (1/n) sum_i |f(X_i) - Y_i|^2 + z^* M z

over ``f = f_z`` on a Fourier grid, which gives
``theta = (Phi^* Phi + n M)^{-1} Phi^* Y``. The Gram matrix is Toeplitz in the
mode difference, so it is filled from exponential sums of the data on the
difference lattice instead of materializing ``Phi``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .freqgrid import FrequencyGrid, lattice_sums, toeplitz_from_lattice
from .penalty import PenaltyMatrix

__all__ = [
    "Dataset",
    "PiklModel",
    "NumericalError",
    "IllConditionedWarning",
    "gram",
    "fit",
    "predict",
    "kernel_value",
    "kernel_matrix",
    "fit_kernel_form",
    "l2_relative_error",
    "l2_error",
    "empirical_risk",
    "risk_gradient",
]


class NumericalError(RuntimeError):
    pass


class IllConditionedWarning(RuntimeWarning):
    """The normal equations were solved with a large relative residual."""


RESIDUAL_WARN = 1e-4


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.Y = np.asarray(self.Y, dtype=float).reshape(-1)
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y have different lengths")
        if self.X.shape[0] < 1:
            raise ValueError("dataset is empty")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def __add__(self, other: "Dataset") -> "Dataset":
        return Dataset(np.vstack([self.X, other.X]), np.concatenate([self.Y, other.Y]))


@dataclass
class PiklModel:
    grid: FrequencyGrid
    theta: np.ndarray
    penalty: PenaltyMatrix
    n: int
    info: dict = field(default_factory=dict)

    def __call__(self, X) -> np.ndarray:
        return predict(self, X)


def gram(grid: FrequencyGrid, X, w=None) -> np.ndarray:
    """``Phi^* diag(w) Phi`` from exponential sums on the difference lattice."""
    S = lattice_sums(grid, X, 2 * grid.m, w)
    return toeplitz_from_lattice(grid, S) / grid.vol


def moment(grid: FrequencyGrid, X, Y) -> np.ndarray:
    """``Phi^* Y``."""
    return lattice_sums(grid, X, grid.m, np.asarray(Y)) / np.sqrt(grid.vol)


def _hermitian_solve(A: np.ndarray, b: np.ndarray, what: str = "normal system", info=None) -> np.ndarray:
    """Solve a Hermitian positive definite system.

    The matrix is equilibrated by its diagonal first; penalty diagonals span
    many orders of magnitude and the scaled Cholesky factor is far better
    conditioned. Falls back to a Bunch-Kaufman solve if Cholesky breaks down.
    """
    A = 0.5 * (A + A.conj().T)
    dg = np.real(np.diag(A)).copy()
    if np.any(~np.isfinite(dg)) or np.any(dg <= 0):
        raise NumericalError(f"the {what} has a non-positive diagonal")
    s = 1.0 / np.sqrt(dg)
    As = A * s[:, None] * s[None, :]
    bs = b * (s[:, None] if b.ndim == 2 else s)
    try:
        cf = linalg.cho_factor(As, lower=True, check_finite=True)
        x = linalg.cho_solve(cf, bs, check_finite=False)
        method = "cholesky"
    except linalg.LinAlgError:
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", linalg.LinAlgWarning)
                x = linalg.solve(As, bs, assume_a="her", check_finite=True)
            method = "bunch-kaufman"
            if caught and info is not None:
                info["ill_conditioned"] = str(caught[-1].message)
        except (linalg.LinAlgError, ValueError):
            w = np.linalg.eigvalsh(As)
            cond = np.inf if w[0] <= 0 else w[-1] / w[0]
            raise NumericalError(
                f"factorization of the {what} failed (condition estimate {cond:.3e})"
            ) from None
    if info is not None:
        info["solver"] = method
    return x * (s[:, None] if b.ndim == 2 else s)


def _penalty_scale(n: int, normalization: str) -> float:
    if normalization == "mean":
        return float(n)
    if normalization == "sum":
        return 1.0
    raise ValueError("normalization must be 'mean' or 'sum'")


def fit(grid: FrequencyGrid, M: PenaltyMatrix, data: Dataset, normalization: str = "mean") -> PiklModel:
    """Solve ``(Phi^* Phi + n M) theta = Phi^* Y`` by Cholesky.

    ``normalization="sum"`` drops the ``1/n`` in front of the data term, so
    the system becomes ``(Phi^* Phi + M) theta = Phi^* Y``; hyperparameters
    tuned on the summed risk keep their meaning.
    """
    if M.matrix.shape != (grid.n_modes, grid.n_modes):
        raise ValueError("penalty size does not match grid")
    if data.X.shape[1] != grid.d:
        raise ValueError("data dimension does not match grid")
    n = data.n
    A = gram(grid, data.X) + _penalty_scale(n, normalization) * M.matrix
    b = moment(grid, data.X, data.Y)
    info = {"normalization": normalization}
    theta = _hermitian_solve(A, b, info=info)
    info["normal_residual"] = float(np.linalg.norm(A @ theta - b) / max(np.linalg.norm(b), 1e-300))
    if info["normal_residual"] > RESIDUAL_WARN:
        warnings.warn(
            f"normal equations solved with relative residual {info['normal_residual']:.2e}; "
            "the penalty weights are too far apart for double precision",
            IllConditionedWarning,
            stacklevel=2,
        )
    return PiklModel(grid, theta, M, n, info)


def predict(model: PiklModel, X, return_imag: bool = False):
    vals = model.grid.evaluate(model.theta, X)
    if return_imag:
        return vals.real, vals.imag
    return vals.real


def kernel_matrix(grid: FrequencyGrid, M: PenaltyMatrix, X, Y=None) -> np.ndarray:
    """``K[i, j] = Phi(x_i)^* M^{-1} Phi(y_j)``."""
    Fx = grid.feature_matrix(X)
    Fy = Fx if Y is None else grid.feature_matrix(Y)
    sol = _hermitian_solve(M.matrix, Fy.T, "penalty matrix")
    return Fx.conj() @ sol


def kernel_value(grid: FrequencyGrid, M: PenaltyMatrix, x, y) -> complex:
    return complex(kernel_matrix(grid, M, np.reshape(x, (1, -1)), np.reshape(y, (1, -1)))[0, 0])


def fit_kernel_form(grid: FrequencyGrid, M: PenaltyMatrix, data: Dataset, normalization: str = "mean") -> Callable:
    """Kernel-trick form ``x -> K(x, X) (K(X, X) + n I)^{-1} Y`` of the same estimator."""
    K = kernel_matrix(grid, M, data.X)
    c = _penalty_scale(data.n, normalization)
    alpha = _hermitian_solve(K + c * np.eye(data.n), data.Y.astype(complex), "kernel system")

    def predictor(X):
        return (kernel_matrix(grid, M, X, data.X) @ alpha).real

    return predictor


def l2_relative_error(pred, reference, points) -> float:
    """``sqrt(sum |pred - ref|^2 / sum |ref|^2)`` over the evaluation points."""
    p = np.asarray(pred(points) if callable(pred) else pred)
    r = np.asarray(reference(points) if callable(reference) else reference)
    den = np.sum(np.abs(r) ** 2)
    if den == 0:
        raise ValueError("reference vanishes on the evaluation points")
    return float(np.sqrt(np.sum(np.abs(p - r) ** 2) / den))


def l2_error(pred, reference, points) -> float:
    """Mean squared difference over the evaluation points."""
    p = np.asarray(pred(points) if callable(pred) else pred)
    r = np.asarray(reference(points) if callable(reference) else reference)
    return float(np.mean(np.abs(p - r) ** 2))


def uniform_grid(lo, hi, num: int = 101) -> np.ndarray:
    """Tensor grid with ``num`` points per axis over the box ``[lo, hi]``."""
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    axes = [np.linspace(a, b, num) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def empirical_risk(grid: FrequencyGrid, M: PenaltyMatrix, data: Dataset, theta) -> float:
    r = grid.evaluate(theta, data.X) - data.Y
    return float(np.mean(np.abs(r) ** 2) + np.vdot(theta, M.matrix @ theta).real)


def fit_info_summary(model: PiklModel) -> str:
    return ", ".join(f"{k}={v}" for k, v in sorted(model.info.items()))


def risk_gradient(grid: FrequencyGrid, M: PenaltyMatrix, data: Dataset, theta) -> np.ndarray:
    """Wirtinger gradient ``d risk / d conj(theta)`` times two.

    The real-coordinate gradient along ``Re(theta_k)`` is the real part of entry
    ``k`` and along ``Im(theta_k)`` its imaginary part.
    """
    Phi = grid.design_matrix(data.X)
    r = Phi @ theta - data.Y
    return 2.0 * (Phi.conj().T @ r / data.n + M.matrix @ theta)
