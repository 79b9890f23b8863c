"""Truncated Fourier modes on an anisotropic torus.

A grid of order ``m`` in dimension ``d`` indexes the ``(2m+1)**d`` modes
``k in {-m..m}^d`` in lexicographic order (first coordinate slowest). Mode ``k``
has angular frequency ``pi * k_j / B_j`` along axis ``j``, where ``B_j`` is the
half-width of the torus ``prod_j [-B_j, B_j]``.

The feature vector at ``x`` holds ``vol**-0.5 * exp(1j * phase * omega_k . x)``
and a coefficient vector ``z`` represents ``f(x) = sum_k z_k conj(phi_k(x))``.
``phase`` is +1 throughout the package; -1 gives the mirrored convention and
only exists so the convention independence of real predictions can be tested.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _accel

__all__ = [
    "FrequencyGrid",
    "FourierCoefficients",
    "lattice_sums",
    "toeplitz_from_lattice",
]


@dataclass(frozen=True)
class FrequencyGrid:
    """Fourier modes ``{-m..m}^d`` on the torus ``prod [-B_j, B_j]``."""

    d: int
    m: int
    B: tuple = field(default=None)
    phase: int = 1

    def __post_init__(self):
        if int(self.d) < 1:
            raise ValueError("dimension d must be >= 1")
        if int(self.m) < 0:
            raise ValueError("truncation m must be >= 0")
        B = self.B
        if B is None:
            B = (np.pi,) * int(self.d)
        elif np.isscalar(B):
            B = (float(B),) * int(self.d)
        B = tuple(float(b) for b in B)
        if len(B) != int(self.d):
            raise ValueError(f"expected {self.d} half-widths, got {len(B)}")
        if any(not np.isfinite(b) or b <= 0 for b in B):
            raise ValueError("half-widths must be positive and finite")
        if self.phase not in (1, -1):
            raise ValueError("phase must be +1 or -1")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "B", B)

    @classmethod
    def centered(cls, d: int, m: int, L: float, phase: int = 1) -> "FrequencyGrid":
        """Grid for a domain inside ``[-L, L]^d`` extended to ``[-2L, 2L]^d``."""
        return cls(d, m, (2.0 * L,) * d, phase)

    @property
    def n_modes(self) -> int:
        return (2 * self.m + 1) ** self.d

    @property
    def vol(self) -> float:
        return float(np.prod([2.0 * b for b in self.B]))

    @property
    def isotropic(self) -> bool:
        return all(b == self.B[0] for b in self.B)

    def enumerate(self) -> np.ndarray:
        """All multi-indices as an ``(n_modes, d)`` integer array."""
        r = range(-self.m, self.m + 1)
        return np.array(list(itertools.product(r, repeat=self.d)), dtype=np.int64).reshape(
            self.n_modes, self.d
        )

    def index_of(self, k) -> int:
        k = np.asarray(k, dtype=np.int64).reshape(-1)
        if k.size != self.d or np.any(np.abs(k) > self.m):
            raise ValueError(f"multi-index {k.tolist()} outside grid")
        idx = 0
        for kj in k:
            idx = idx * (2 * self.m + 1) + int(kj) + self.m
        return idx

    def multi_index_of(self, i: int) -> tuple:
        if not 0 <= i < self.n_modes:
            raise IndexError(i)
        out = []
        for _ in range(self.d):
            i, r = divmod(i, 2 * self.m + 1)
            out.append(r - self.m)
        return tuple(reversed(out))

    def frequencies(self, K=None) -> np.ndarray:
        """Angular frequencies ``pi * k / B`` for the modes (or given indices)."""
        K = self.enumerate() if K is None else np.asarray(K, dtype=float)
        return np.pi * K / np.asarray(self.B)

    def _check_points(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.d) if self.d > 1 else X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"points must have {self.d} coordinates, got shape {X.shape}")
        return X

    def axis_phases(self, X, r: int | None = None) -> list:
        """Per-axis phase tables ``exp(i*phase*pi*k*x_j/B_j)`` for ``k in -r..r``."""
        X = self._check_points(X)
        r = self.m if r is None else r
        ks = np.arange(-r, r + 1)
        return [
            np.exp(1j * self.phase * np.pi * np.outer(X[:, j], ks) / self.B[j])
            for j in range(self.d)
        ]

    def feature_matrix(self, X) -> np.ndarray:
        """Rows are ``Phi_m(x_i)`` (shape ``(n, n_modes)``)."""
        X = self._check_points(X)
        tabs = self.axis_phases(X)
        out = tabs[0]
        for t in tabs[1:]:
            out = (out[:, :, None] * t[:, None, :]).reshape(X.shape[0], -1)
        return out / np.sqrt(self.vol)

    def feature_vector(self, x) -> np.ndarray:
        return self.feature_matrix(np.reshape(x, (1, self.d)))[0]

    def design_matrix(self, X) -> np.ndarray:
        """Rows are ``Phi_m(x_i)^*`` so that ``f(X) = design @ z``."""
        return np.conj(self.feature_matrix(X))

    def evaluate(self, z, X, chunk: int = 8192) -> np.ndarray:
        """Complex values of ``f_z`` at the rows of ``X``."""
        X = self._check_points(X)
        z = np.asarray(z)
        if z.shape != (self.n_modes,):
            raise ValueError(f"coefficient length {z.shape} does not match {self.n_modes} modes")
        out = np.empty(X.shape[0], dtype=complex)
        for s in range(0, X.shape[0], chunk):
            out[s : s + chunk] = self.design_matrix(X[s : s + chunk]) @ z
        return out

    def mirror_index(self) -> np.ndarray:
        """Permutation sending mode ``k`` to mode ``-k``."""
        return np.arange(self.n_modes)[::-1].copy()


@dataclass
class FourierCoefficients:
    grid: FrequencyGrid
    z: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=complex)
        if self.z.shape != (self.grid.n_modes,):
            raise ValueError("coefficient length does not match grid")

    def __call__(self, X) -> np.ndarray:
        return self.grid.evaluate(self.z, X)

    def real(self, X) -> np.ndarray:
        return self.grid.evaluate(self.z, X).real

    @property
    def symmetry_residual(self) -> float:
        """``max_k |z_k - conj(z_{-k})|``; zero for real-valued functions."""
        return float(np.max(np.abs(self.z - np.conj(self.z[self.grid.mirror_index()]))))


# ---------------------------------------------------------------------------
# Lattice sums: sum_i w_i exp(i*phase*pi*delta.x_i/B) for delta in {-r..r}^d.
# With r = 2m this is the empirical characteristic function that fills the
# Gram matrix Phi^* Phi; with r = m and w = y it is Phi^* Y.


@_accel.njit
def _lattice_sums_nb(X, B, r, w, phase):
    n, d = X.shape
    width = 2 * r + 1
    inner = width ** (d - 1)
    out_re = np.zeros(inner * width)
    out_im = np.zeros(inner * width)
    tab_re = np.empty((d, width))
    tab_im = np.empty((d, width))
    pre_re = np.empty(d)
    pre_im = np.empty(d)
    digits = np.zeros(max(d - 1, 1), dtype=np.int64)
    for i in range(n):
        for j in range(d):
            a = phase * np.pi * X[i, j] / B[j]
            for q in range(width):
                ang = a * (q - r)
                tab_re[j, q] = np.cos(ang)
                tab_im[j, q] = np.sin(ang)
        # prefix products over the leading d-1 axes, odometer order
        for j in range(d - 1):
            digits[j] = 0
        pre_re[0] = w[i].real
        pre_im[0] = w[i].imag
        for j in range(d - 1):
            pre_re[j + 1] = pre_re[j] * tab_re[j, 0] - pre_im[j] * tab_im[j, 0]
            pre_im[j + 1] = pre_re[j] * tab_im[j, 0] + pre_im[j] * tab_re[j, 0]
        last = d - 1
        for p in range(inner):
            pr = pre_re[last]
            pi_ = pre_im[last]
            base = p * width
            # contiguous innermost axis: this loop vectorizes
            for q in range(width):
                out_re[base + q] += pr * tab_re[last, q] - pi_ * tab_im[last, q]
                out_im[base + q] += pr * tab_im[last, q] + pi_ * tab_re[last, q]
            j = d - 2
            while j >= 0:
                digits[j] += 1
                if digits[j] < width:
                    break
                digits[j] = 0
                j -= 1
            if j < 0:
                break
            for jj in range(j, d - 1):
                c_re = tab_re[jj, digits[jj]]
                c_im = tab_im[jj, digits[jj]]
                pre_re[jj + 1] = pre_re[jj] * c_re - pre_im[jj] * c_im
                pre_im[jj + 1] = pre_re[jj] * c_im + pre_im[jj] * c_re
    return out_re + 1j * out_im


def _lattice_sums_np(X, B, r, w, phase, chunk=4096):
    n, d = X.shape
    width = 2 * r + 1
    ks = np.arange(-r, r + 1)
    out = np.zeros(width**d, dtype=complex)
    for s in range(0, n, chunk):
        Xc = X[s : s + chunk]
        tabs = [np.exp(1j * phase * np.pi * np.outer(Xc[:, j], ks) / B[j]) for j in range(d)]
        head = tabs[0] * w[s : s + chunk, None]
        if d == 1:
            out += head.sum(axis=0)
            continue
        for t in tabs[1:-1]:
            head = (head[:, :, None] * t[:, None, :]).reshape(Xc.shape[0], -1)
        out += (head.T @ tabs[-1]).reshape(-1)
    return out


def lattice_sums(grid: FrequencyGrid, X, r: int, w=None) -> np.ndarray:
    """Weighted exponential sums over the lattice ``{-r..r}^d`` (lexicographic)."""
    X = grid._check_points(X)
    w = np.ones(X.shape[0]) if w is None else np.asarray(w)
    if w.shape != (X.shape[0],):
        raise ValueError("weights must have one entry per point")
    w = w.astype(complex)
    B = np.asarray(grid.B, dtype=float)
    if _accel.USE_NUMBA:
        return _lattice_sums_nb(np.ascontiguousarray(X), B, int(r), w, float(grid.phase))
    return _lattice_sums_np(X, B, int(r), w, grid.phase)


@_accel.njit
def _toeplitz_nb(values, K, m):
    N, d = K.shape
    width = 4 * m + 1
    out = np.empty((N, N), dtype=np.complex128)
    for a in range(N):
        for b in range(N):
            flat = 0
            for j in range(d):
                flat = flat * width + (K[a, j] - K[b, j] + 2 * m)
            out[a, b] = values[flat]
    return out


def _toeplitz_np(values, K, m):
    width = 4 * m + 1
    N, d = K.shape
    flat = np.zeros((N, N), dtype=np.int64)
    for j in range(d):
        flat = flat * width + (K[:, None, j] - K[None, :, j] + 2 * m)
    return values[flat]


def toeplitz_from_lattice(grid: FrequencyGrid, values) -> np.ndarray:
    """Matrix ``T[a, b] = values[k_a - k_b]`` from values on ``{-2m..2m}^d``."""
    values = np.asarray(values, dtype=complex)
    if values.shape != ((4 * grid.m + 1) ** grid.d,):
        raise ValueError("expected values on the (4m+1)^d difference lattice")
    K = grid.enumerate()
    if _accel.USE_NUMBA:
        return _toeplitz_nb(values, K, grid.m)
    return _toeplitz_np(values, K, grid.m)


def difference_lattice(grid: FrequencyGrid) -> np.ndarray:
    """Multi-indices of ``{-2m..2m}^d`` in lexicographic order."""
    r = range(-2 * grid.m, 2 * grid.m + 1)
    return np.array(list(itertools.product(r, repeat=grid.d)), dtype=np.int64).reshape(-1, grid.d)
