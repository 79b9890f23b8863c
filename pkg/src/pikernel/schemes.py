"""Finite-difference baselines for the 1-D wave equation ``f_tt = 4 f_xx``.

The space-time square ``[0,1]^2`` carries ``l1`` time steps and ``l2`` space
steps. Row ``a`` of the field is time ``a/l1`` and column ``b`` is position
``b/l2``. Initial values ``f(0, .)`` and Dirichlet values ``f(., 0)``,
``f(., 1)`` are the data. They may carry Gaussian noise, and every other node
is produced by the scheme. The initial velocity is zero.

Schemes
-------
``euler``   explicit three-level (leapfrog) recursion started by a Taylor step.
``rk4``     classical Runge-Kutta 4 on the first-order system ``(f, g = f_t)``;
            ``variant="literal"`` reproduces a stage layout that mixes ``f``
            and ``g`` increments (kept for comparison, it is not consistent).
``cn``      implicit scheme averaging the Laplacian over levels ``a`` and
            ``a+1``; ``variant="standard"`` is the textbook (1/4, 1/2, 1/4)
            weighting and ``variant="literal"`` applies the recursion
            literally with ``- f(a-1)`` as the final term (unstable).

Fields can be large (``l1 * l2`` nodes), so errors against a reference are
accumulated row by row and the field itself is only stored on request.
"""
from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field as dc_field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import _accel

__all__ = [
    "WaveGrid",
    "WaveResult",
    "wave_reference",
    "split_budget",
    "euler_wave",
    "rk4_wave",
    "cn_wave",
    "run_scheme",
]

WAVE_SPEED = 2.0


def wave_reference(t, x):
    """Exact solution for ``f(0,x) = sin(pi x) + sin(4 pi x)/2`` and zero velocity."""
    return np.sin(np.pi * x) * np.cos(2 * np.pi * t) + np.sin(4 * np.pi * x) * np.cos(8 * np.pi * t) / 2


def _initial_profile(x):
    return np.sin(np.pi * x) + np.sin(4 * np.pi * x) / 2


def split_budget(n: int, ratio: int = 2) -> tuple[int, int]:
    """``(l1, l2)`` with ``l1 = ratio * l2`` and ``2*l1 + l2 = n`` (rounded down)."""
    l2 = max(2, n // (2 * ratio + 1))
    return ratio * l2, l2


@dataclass
class WaveGrid:
    l1: int
    l2: int
    sigma: float = 0.0
    seed: int = 0
    profile: Callable | None = None  # initial values; defaults to the reference profile

    def __post_init__(self):
        if self.l1 < 2 or self.l2 < 2:
            raise ValueError("need at least two steps in time and space")
        if self.sigma < 0:
            raise ValueError("noise level must be non-negative")

    @property
    def courant(self) -> float:
        return WAVE_SPEED * self.l2 / self.l1

    @property
    def n_data(self) -> int:
        return 2 * self.l1 + self.l2

    def data(self):
        """Initial row and boundary columns, with noise on every data node."""
        x = np.arange(self.l2 + 1) / self.l2
        f0 = np.asarray((self.profile or _initial_profile)(x), dtype=float).copy()
        f0[0] = f0[-1] = 0.0
        left = np.zeros(self.l1 + 1)
        right = np.zeros(self.l1 + 1)
        if self.sigma > 0:
            rng = np.random.Generator(np.random.Philox(self.seed))
            f0 = f0 + self.sigma * rng.standard_normal(f0.shape)
            left[1:] += self.sigma * rng.standard_normal(self.l1)
            right[1:] += self.sigma * rng.standard_normal(self.l1)
            left[0], right[0] = f0[0], f0[-1]
        return f0, left, right

    def reference_factors(self):
        """``ref[a, b] = sum_r T[r, a] * S[r, b]`` for the exact solution."""
        t = np.arange(self.l1 + 1) / self.l1
        x = np.arange(self.l2 + 1) / self.l2
        T = np.stack([np.cos(2 * np.pi * t), np.cos(8 * np.pi * t) / 2])
        S = np.stack([np.sin(np.pi * x), np.sin(4 * np.pi * x)])
        return T, S


@dataclass
class WaveResult:
    scheme: str
    variant: str
    grid: WaveGrid
    l2_relative_error: float
    max_abs: float
    diverged: bool
    field: np.ndarray | None = None
    stride: int = 1
    info: dict = dc_field(default_factory=dict)


# ---------------------------------------------------------------------------
# numba kernels: whole time loops, accumulating squared errors per row


@_accel.njit
def _row_err(u, a, T, S):
    num = 0.0
    den = 0.0
    for b in range(u.shape[0]):
        r = 0.0
        for q in range(T.shape[0]):
            r += T[q, a] * S[q, b]
        e = u[b] - r
        num += e * e
        den += r * r
    return num, den


@_accel.njit
def _euler_nb(f0, left, right, l1, l2, T, S, store, stride):
    nx = l2 + 1
    c = (l2 / l1) ** 2
    prev = f0.copy()
    cur = np.empty(nx)
    cur[0] = left[1]
    cur[nx - 1] = right[1]
    for b in range(1, nx - 1):
        cur[b] = prev[b] + 2.0 * c * (prev[b + 1] - 2.0 * prev[b] + prev[b - 1])
    num, den = _row_err(prev, 0, T, S)
    n1, d1 = _row_err(cur, 1, T, S)
    num += n1
    den += d1
    big = max(np.max(np.abs(prev)), np.max(np.abs(cur)))
    if store.shape[0] > 0:
        store[0, :] = prev
        if stride == 1:
            store[1, :] = cur
    nxt = np.empty(nx)
    for a in range(1, l1):
        nxt[0] = left[a + 1]
        nxt[nx - 1] = right[a + 1]
        for b in range(1, nx - 1):
            nxt[b] = 2.0 * cur[b] - prev[b] + 4.0 * c * (cur[b + 1] - 2.0 * cur[b] + cur[b - 1])
        n1, d1 = _row_err(nxt, a + 1, T, S)
        num += n1
        den += d1
        m = np.max(np.abs(nxt))
        if m > big:
            big = m
        if store.shape[0] > 0 and (a + 1) % stride == 0:
            store[(a + 1) // stride, :] = nxt
        tmp = prev
        prev = cur
        cur = nxt
        nxt = tmp
    return num, den, big


@_accel.njit
def _lap(u, out, l2):
    s = l2 * l2
    out[0] = 0.0
    out[u.shape[0] - 1] = 0.0
    for b in range(1, u.shape[0] - 1):
        out[b] = s * (u[b + 1] - 2.0 * u[b] + u[b - 1])


@_accel.njit
def _rk4_nb(f0, left, right, l1, l2, T, S, store, stride, literal):
    nx = l2 + 1
    h = 1.0 / l1
    f = f0.copy()
    g = np.zeros(nx)
    k1f = np.empty(nx)
    k1g = np.empty(nx)
    k2f = np.empty(nx)
    k2g = np.empty(nx)
    k3f = np.empty(nx)
    k3g = np.empty(nx)
    k4f = np.empty(nx)
    k4g = np.empty(nx)
    tmp = np.empty(nx)
    lap = np.empty(nx)
    num, den = _row_err(f, 0, T, S)
    big = np.max(np.abs(f))
    if store.shape[0] > 0:
        store[0, :] = f
    for a in range(l1):
        _lap(f, lap, l2)
        if literal:
            for b in range(nx):
                k1f[b] = g[b] * h
                k1g[b] = 4.0 * lap[b] * h
            for b in range(nx):
                k2f[b] = (g[b] + 0.5 * k1f[b]) * h
                k2g[b] = 4.0 * (0.5 * k1g[b] + lap[b]) * h
            for b in range(nx):
                k3f[b] = (g[b] + 0.5 * k2f[b]) * h
                k3g[b] = 4.0 * (0.5 * k2g[b] + lap[b]) * h
            for b in range(nx):
                k4f[b] = (g[b] + k3f[b]) * h
                k4g[b] = 4.0 * (k3g[b] + lap[b]) * h
        else:
            for b in range(nx):
                k1f[b] = g[b]
                k1g[b] = 4.0 * lap[b]
                tmp[b] = f[b] + 0.5 * h * k1f[b]
            _lap(tmp, lap, l2)
            for b in range(nx):
                k2f[b] = g[b] + 0.5 * h * k1g[b]
                k2g[b] = 4.0 * lap[b]
                tmp[b] = f[b] + 0.5 * h * k2f[b]
            _lap(tmp, lap, l2)
            for b in range(nx):
                k3f[b] = g[b] + 0.5 * h * k2g[b]
                k3g[b] = 4.0 * lap[b]
                tmp[b] = f[b] + h * k3f[b]
            _lap(tmp, lap, l2)
            for b in range(nx):
                k4f[b] = g[b] + h * k3g[b]
                k4g[b] = 4.0 * lap[b]
            for b in range(nx):
                k1f[b] *= h
                k2f[b] *= h
                k3f[b] *= h
                k4f[b] *= h
                k1g[b] *= h
                k2g[b] *= h
                k3g[b] *= h
                k4g[b] *= h
        for b in range(nx):
            f[b] += (k1f[b] + 2.0 * k2f[b] + 2.0 * k3f[b] + k4f[b]) / 6.0
            g[b] += (k1g[b] + 2.0 * k2g[b] + 2.0 * k3g[b] + k4g[b]) / 6.0
        f[0] = left[a + 1]
        f[nx - 1] = right[a + 1]
        g[0] = 0.0
        g[nx - 1] = 0.0
        n1, d1 = _row_err(f, a + 1, T, S)
        num += n1
        den += d1
        m = np.max(np.abs(f))
        if m > big:
            big = m
        if store.shape[0] > 0 and (a + 1) % stride == 0:
            store[(a + 1) // stride, :] = f
    return num, den, big


@_accel.njit
def _thomas(diag, off, rhs, out, cp, dp):
    # constant tridiagonal matrix: diag on the diagonal, off on both neighbours
    n = rhs.shape[0]
    cp[0] = off / diag
    dp[0] = rhs[0] / diag
    for i in range(1, n):
        den = diag - off * cp[i - 1]
        cp[i] = off / den
        dp[i] = (rhs[i] - off * dp[i - 1]) / den
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]


@_accel.njit
def _cn_nb(f0, left, right, l1, l2, T, S, store, stride, mode):
    # mode 0: levels a and a+1 averaged; 1: literal recursion; 2: (1/4, 1/2, 1/4)
    nx = l2 + 1
    ni = nx - 2
    c = (l2 / l1) ** 2
    prev = f0.copy()
    cur = np.empty(nx)
    cur[0] = left[1]
    cur[nx - 1] = right[1]
    for b in range(1, nx - 1):
        cur[b] = prev[b] + 2.0 * c * (prev[b + 1] - 2.0 * prev[b] + prev[b - 1])
    num, den = _row_err(prev, 0, T, S)
    n1, d1 = _row_err(cur, 1, T, S)
    num += n1
    den += d1
    big = max(np.max(np.abs(prev)), np.max(np.abs(cur)))
    if store.shape[0] > 0:
        store[0, :] = prev
        if stride == 1:
            store[1, :] = cur
    if mode == 2:
        w = c  # 4 * c / 4
    else:
        w = 2.0 * c
    diag = 1.0 + 2.0 * w
    off = -w
    rhs = np.empty(ni)
    sol = np.empty(ni)
    cp = np.empty(ni)
    dp = np.empty(ni)
    nxt = np.empty(nx)
    for a in range(1, l1):
        lo = left[a + 1]
        hi = right[a + 1]
        for i in range(ni):
            b = i + 1
            if mode == 0:
                rhs[i] = 2.0 * cur[b] - prev[b] + w * (cur[b + 1] - 2.0 * cur[b] + cur[b - 1])
            elif mode == 1:
                rhs[i] = 3.0 * cur[b] - prev[b]
            else:
                rhs[i] = (
                    2.0 * cur[b]
                    - prev[b]
                    + 2.0 * c * (cur[b + 1] - 2.0 * cur[b] + cur[b - 1])
                    + c * (prev[b + 1] - 2.0 * prev[b] + prev[b - 1])
                )
        if mode != 1:
            rhs[0] += w * lo
            rhs[ni - 1] += w * hi
        _thomas(diag, off, rhs, sol, cp, dp)
        nxt[0] = lo
        nxt[nx - 1] = hi
        for i in range(ni):
            if mode == 1:
                nxt[i + 1] = sol[i] - prev[i + 1]
            else:
                nxt[i + 1] = sol[i]
        n1, d1 = _row_err(nxt, a + 1, T, S)
        num += n1
        den += d1
        m = np.max(np.abs(nxt))
        if m > big:
            big = m
        if store.shape[0] > 0 and (a + 1) % stride == 0:
            store[(a + 1) // stride, :] = nxt
        tmp = prev
        prev = cur
        cur = nxt
        nxt = tmp
    return num, den, big


# ---------------------------------------------------------------------------
# numpy fallbacks: same recursions, vectorized over space


class _Acc:
    def __init__(self, T, S, store, stride):
        self.T, self.S, self.store, self.stride = T, S, store, stride
        self.num = 0.0
        self.den = 0.0
        self.big = 0.0

    def row(self, u, a):
        r = self.T[:, a] @ self.S
        self.num += float(np.sum((u - r) ** 2))
        self.den += float(np.sum(r * r))
        self.big = max(self.big, float(np.max(np.abs(u))))
        if self.store.shape[0] > 0 and a % self.stride == 0:
            self.store[a // self.stride] = u


def _lap_np(u, l2):
    out = np.zeros_like(u)
    out[1:-1] = l2 * l2 * (u[2:] - 2.0 * u[1:-1] + u[:-2])
    return out


def _taylor_start(f0, left, right, l1, l2):
    cur = f0 + 2.0 * _lap_np(f0, l2) / l1**2
    cur[0], cur[-1] = left[1], right[1]
    return cur


def _euler_np(f0, left, right, l1, l2, T, S, store, stride):
    acc = _Acc(T, S, store, stride)
    prev = f0.copy()
    cur = _taylor_start(f0, left, right, l1, l2)
    acc.row(prev, 0)
    acc.row(cur, 1)
    for a in range(1, l1):
        nxt = 2.0 * cur - prev + 4.0 * _lap_np(cur, l2) / l1**2
        nxt[0], nxt[-1] = left[a + 1], right[a + 1]
        acc.row(nxt, a + 1)
        prev, cur = cur, nxt
    return acc.num, acc.den, acc.big


def _rk4_np(f0, left, right, l1, l2, T, S, store, stride, literal):
    acc = _Acc(T, S, store, stride)
    h = 1.0 / l1
    f = f0.copy()
    g = np.zeros_like(f)
    acc.row(f, 0)
    for a in range(l1):
        lap = _lap_np(f, l2)
        if literal:
            k1f, k1g = g * h, 4.0 * lap * h
            k2f, k2g = (g + 0.5 * k1f) * h, 4.0 * (0.5 * k1g + lap) * h
            k3f, k3g = (g + 0.5 * k2f) * h, 4.0 * (0.5 * k2g + lap) * h
            k4f, k4g = (g + k3f) * h, 4.0 * (k3g + lap) * h
        else:
            k1f, k1g = g, 4.0 * lap
            k2f, k2g = g + 0.5 * h * k1g, 4.0 * _lap_np(f + 0.5 * h * k1f, l2)
            k3f, k3g = g + 0.5 * h * k2g, 4.0 * _lap_np(f + 0.5 * h * k2f, l2)
            k4f, k4g = g + h * k3g, 4.0 * _lap_np(f + h * k3f, l2)
            k1f, k2f, k3f, k4f = k1f * h, k2f * h, k3f * h, k4f * h
            k1g, k2g, k3g, k4g = k1g * h, k2g * h, k3g * h, k4g * h
        f = f + (k1f + 2.0 * k2f + 2.0 * k3f + k4f) / 6.0
        g = g + (k1g + 2.0 * k2g + 2.0 * k3g + k4g) / 6.0
        f[0], f[-1] = left[a + 1], right[a + 1]
        g[0] = g[-1] = 0.0
        acc.row(f, a + 1)
    return acc.num, acc.den, acc.big


def _cn_np(f0, left, right, l1, l2, T, S, store, stride, mode):
    acc = _Acc(T, S, store, stride)
    c = (l2 / l1) ** 2
    w = c if mode == 2 else 2.0 * c
    ni = l2 - 1
    A = sparse.diags(
        [np.full(ni - 1, -w), np.full(ni, 1.0 + 2.0 * w), np.full(ni - 1, -w)], [-1, 0, 1], format="csc"
    )
    lu = splinalg.splu(A)
    prev = f0.copy()
    cur = _taylor_start(f0, left, right, l1, l2)
    acc.row(prev, 0)
    acc.row(cur, 1)
    for a in range(1, l1):
        lo, hi = left[a + 1], right[a + 1]
        d2c = cur[2:] - 2.0 * cur[1:-1] + cur[:-2]
        if mode == 0:
            rhs = 2.0 * cur[1:-1] - prev[1:-1] + w * d2c
        elif mode == 1:
            rhs = 3.0 * cur[1:-1] - prev[1:-1]
        else:
            d2p = prev[2:] - 2.0 * prev[1:-1] + prev[:-2]
            rhs = 2.0 * cur[1:-1] - prev[1:-1] + 2.0 * c * d2c + c * d2p
        if mode != 1:
            rhs[0] += w * lo
            rhs[-1] += w * hi
        sol = lu.solve(rhs)
        nxt = np.empty_like(cur)
        nxt[1:-1] = sol - prev[1:-1] if mode == 1 else sol
        nxt[0], nxt[-1] = lo, hi
        acc.row(nxt, a + 1)
        prev, cur = cur, nxt
    return acc.num, acc.den, acc.big


def _store_buffer(g: WaveGrid, keep_field: bool, stride: int):
    if not keep_field:
        return np.zeros((0, g.l2 + 1))
    return np.zeros((g.l1 // stride + 1, g.l2 + 1))


def _finish(name, variant, g, num, den, big, store, stride, keep_field):
    err = float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))
    diverged = not np.isfinite(big) or big > 1e3 * (1.0 + 10 * g.sigma)
    return WaveResult(
        name,
        variant,
        g,
        err if np.isfinite(err) else float("inf"),
        float(big),
        bool(diverged),
        store if keep_field else None,
        stride,
        {"courant": g.courant, "l1": g.l1, "l2": g.l2, "n_data": g.n_data, "backend": _accel.backend()},
    )


def euler_wave(g: WaveGrid, keep_field: bool = False, stride: int = 1) -> WaveResult:
    f0, left, right = g.data()
    T, S = g.reference_factors()
    store = _store_buffer(g, keep_field, stride)
    fn = _euler_nb if _accel.USE_NUMBA else _euler_np
    with np.errstate(over="ignore", invalid="ignore"):
        num, den, big = fn(f0, left, right, g.l1, g.l2, T, S, store, stride)
    return _finish("euler", "leapfrog", g, num, den, big, store, stride, keep_field)


def rk4_wave(g: WaveGrid, variant: str = "standard", keep_field: bool = False, stride: int = 1) -> WaveResult:
    if variant not in ("standard", "literal"):
        raise ValueError("rk4 variant must be 'standard' or 'literal'")
    f0, left, right = g.data()
    T, S = g.reference_factors()
    store = _store_buffer(g, keep_field, stride)
    fn = _rk4_nb if _accel.USE_NUMBA else _rk4_np
    with np.errstate(over="ignore", invalid="ignore"):
        num, den, big = fn(f0, left, right, g.l1, g.l2, T, S, store, stride, variant == "literal")
    return _finish("rk4", variant, g, num, den, big, store, stride, keep_field)


_CN_MODES = {"two_level": 0, "literal": 1, "standard": 2}


def cn_wave(g: WaveGrid, variant: str = "two_level", keep_field: bool = False, stride: int = 1) -> WaveResult:
    """Implicit scheme; ``two_level`` is the default reading (see module docstring)."""
    if variant not in _CN_MODES:
        raise ValueError(f"cn variant must be one of {sorted(_CN_MODES)}")
    f0, left, right = g.data()
    T, S = g.reference_factors()
    store = _store_buffer(g, keep_field, stride)
    fn = _cn_nb if _accel.USE_NUMBA else _cn_np
    with np.errstate(over="ignore", invalid="ignore"):
        num, den, big = fn(f0, left, right, g.l1, g.l2, T, S, store, stride, _CN_MODES[variant])
    return _finish("cn", variant, g, num, den, big, store, stride, keep_field)


def run_scheme(name: str, g: WaveGrid, variant: str | None = None, **kw) -> WaveResult:
    if name == "euler":
        return euler_wave(g, **kw)
    if name == "rk4":
        return rk4_wave(g, variant or "standard", **kw)
    if name == "cn":
        return cn_wave(g, variant or "two_level", **kw)
    raise ValueError(f"unknown scheme {name!r}")


def field_to_csv(result: WaveResult, path) -> None:
    """Long-format ``t,x,value`` export of a stored field."""
    if result.field is None:
        raise ValueError("field was not stored; rerun with keep_field=True")
    g = result.grid
    t = np.arange(result.field.shape[0]) * result.stride / g.l1
    x = np.arange(g.l2 + 1) / g.l2
    tt, xx = np.meshgrid(t, x, indexing="ij")
    data = np.column_stack([tt.ravel(), xx.ravel(), result.field.ravel()])
    np.savetxt(path, data, delimiter=",", header="t,x,value", comments="", fmt="%.10g")
