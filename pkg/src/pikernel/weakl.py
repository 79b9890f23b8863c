"""Weak kernel learners: closed-form penalized least squares with structure.

Every estimator here minimizes

    (1/n) sum_t ||Lam (Phi_t theta - Y_t)||^2 + ||M theta||^2  (+ extra quadratic terms)

whose minimizer is ``(sum Phi_t^* Lam^2 Phi_t + n M^* M)^{-1} sum Phi_t^* Lam^2 Y_t``.
The specializations differ in how ``Phi_t``, ``Lam`` and ``M`` are built:
additive effects, time-varying corrections of a fitted additive model,
forecast combinations and hierarchies tied by a summation matrix.

Feature rows are ``conj(phi(x))`` so that predictions are ``<phi(x), theta>``.
Fourier maps use ``exp(i k x / 2)`` on inputs rescaled to ``[-pi, pi]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

__all__ = [
    "Rescaler",
    "FeatureBlock",
    "Linear",
    "Fourier",
    "Categorical",
    "WeaKLFit",
    "solve",
    "weakl_risk",
    "weakl_gradient",
    "AdditiveModel",
    "additive_fit",
    "OnlineModel",
    "online_fit",
    "Combination",
    "combine_forecasts",
    "constraint_projector",
    "SummationMatrix",
    "HierFit",
    "hier_bu",
    "hier_global",
    "hier_transfer",
    "ols_infeasible",
]


class WeaKLError(ValueError):
    pass


# ---------------------------------------------------------------------------
# feature maps


@dataclass
class Rescaler:
    """Affine map of ``[lo, hi]`` onto ``[-pi, pi]``; inputs outside are clamped."""

    lo: float
    hi: float

    @classmethod
    def fit(cls, x) -> "Rescaler":
        x = np.asarray(x, dtype=float)
        lo, hi = float(np.min(x)), float(np.max(x))
        if hi == lo:
            hi = lo + 1.0
        return cls(lo, hi)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = -np.pi + 2 * np.pi * (x - self.lo) / (self.hi - self.lo)
        if np.any(u < -np.pi - 1e-12) or np.any(u > np.pi + 1e-12):
            warnings.warn("inputs outside the training range were clamped", RuntimeWarning, stacklevel=2)
            u = np.clip(u, -np.pi, np.pi)
        return u


def fourier_map(u, m: int) -> np.ndarray:
    """``(exp(i k u / 2))_{-m <= k <= m}`` for each entry of ``u``; shape (n, 2m+1)."""
    k = np.arange(-m, m + 1)
    return np.exp(0.5j * np.outer(np.asarray(u, dtype=float).reshape(-1), k))


def sobolev_weights(m: int, s: int) -> np.ndarray:
    k = np.arange(-m, m + 1, dtype=float)
    return np.sqrt(1.0 + k ** (2 * s))


class FeatureBlock:
    kind = "block"
    dim: int

    def fit(self, x) -> "FeatureBlock":
        return self

    def features(self, x) -> np.ndarray:
        raise NotImplementedError

    def design(self, x) -> np.ndarray:
        return np.conj(self.features(x))

    def regularizer(self) -> np.ndarray:
        return np.eye(self.dim)


@dataclass
class Linear(FeatureBlock):
    input_dim: int = 1
    kind = "linear"

    @property
    def dim(self) -> int:
        return self.input_dim

    def features(self, x):
        x = np.asarray(x, dtype=float)
        return x.reshape(x.shape[0], -1).astype(complex)


@dataclass
class Fourier(FeatureBlock):
    m: int = 5
    s: int = 2
    rescaler: Rescaler | None = None
    kind = "fourier"

    @property
    def dim(self) -> int:
        return 2 * self.m + 1

    def fit(self, x):
        if self.rescaler is None:
            self.rescaler = Rescaler.fit(x)
        return self

    def features(self, x):
        u = self.rescaler(x) if self.rescaler is not None else np.asarray(x, dtype=float)
        return fourier_map(u, self.m)

    def regularizer(self):
        return np.diag(sobolev_weights(self.m, self.s))


@dataclass
class Categorical(FeatureBlock):
    """Categories ``0..card-1`` placed at ``-pi + 2 pi i / card`` before the Fourier map."""

    card: int = 2
    kind = "categorical"

    @property
    def m(self) -> int:
        return self.card // 2

    @property
    def dim(self) -> int:
        return 2 * self.m + 1

    def features(self, x):
        x = np.asarray(x).reshape(-1)
        if np.any((x < 0) | (x >= self.card)) or np.any(x != np.round(x)):
            raise WeaKLError(f"categorical values must be integers in [0, {self.card})")
        u = -np.pi + 2 * np.pi * x.astype(float) / self.card
        return fourier_map(u, self.m)


# ---------------------------------------------------------------------------
# generic solver


@dataclass
class WeaKLFit:
    theta: np.ndarray
    normal_matrix: np.ndarray
    info: dict = field(default_factory=dict)


def _solve_hpd(A, b, info):
    A = 0.5 * (A + A.conj().T)
    try:
        cf = linalg.cho_factor(A, lower=True)
        x = linalg.cho_solve(cf, b)
        info["solver"] = "cholesky"
    except linalg.LinAlgError:
        w = linalg.eigvalsh(A)
        cond = np.inf if w[0] <= 0 else w[-1] / w[0]
        raise np.linalg.LinAlgError(f"normal system is singular (condition estimate {cond:.3e})") from None
    res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
    info["normal_residual"] = float(res)
    return x


def _penalty_gram(M=None, MtM=None, dim=None):
    if MtM is not None:
        return np.asarray(MtM)
    if M is None:
        return np.zeros((dim, dim))
    M = np.asarray(M)
    return M.conj().T @ M


def solve(Phi, Y, Lam=None, M=None, MtM=None, extra=None) -> WeaKLFit:
    """Minimizer of the weighted penalized risk.

    Phi : (n, d2, D) feature matrices ``Phi_t`` (or (n, D) when ``d2 = 1``)
    Y   : (n, d2) targets (or (n,))
    Lam : (d2,) diagonal trust weights, default ones
    M / MtM : penalty factor or its Gram ``M^* M``
    extra : additional Hermitian matrix added to the normal system unscaled
    """
    Phi = np.asarray(Phi)
    Y = np.asarray(Y)
    if Phi.ndim == 2:
        Phi = Phi[:, None, :]
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d2, D = Phi.shape
    if Y.shape != (n, d2):
        raise WeaKLError(f"targets have shape {Y.shape}, expected {(n, d2)}")
    if n < 1:
        raise WeaKLError("no observations")
    lam = np.ones(d2) if Lam is None else np.asarray(Lam, dtype=float).reshape(-1)
    if lam.shape != (d2,):
        raise WeaKLError("Lam must be a diagonal with one entry per target")
    w = lam**2
    A = np.einsum("tkd,k,tke->de", Phi.conj(), w, Phi) + n * _penalty_gram(M, MtM, D)
    if extra is not None:
        A = A + extra
    b = np.einsum("tkd,k,tk->d", Phi.conj(), w, Y)
    info = {}
    theta = _solve_hpd(A, b, info)
    return WeaKLFit(theta, A, info)


def weakl_risk(Phi, Y, theta, Lam=None, M=None, MtM=None, extra=None) -> float:
    Phi = np.asarray(Phi)
    Y = np.asarray(Y)
    if Phi.ndim == 2:
        Phi = Phi[:, None, :]
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d2, D = Phi.shape
    lam = np.ones(d2) if Lam is None else np.asarray(Lam, dtype=float)
    r = np.einsum("tkd,d->tk", Phi, theta) - Y
    out = np.mean(np.sum(lam**2 * np.abs(r) ** 2, axis=1))
    out += np.vdot(theta, _penalty_gram(M, MtM, D) @ theta).real
    if extra is not None:
        out += np.vdot(theta, extra @ theta).real / n
    return float(out)


def weakl_gradient(Phi, Y, theta, Lam=None, M=None, MtM=None, extra=None) -> np.ndarray:
    """Twice the Wirtinger derivative in ``conj(theta)``; zero at the minimizer."""
    Phi = np.asarray(Phi)
    Y = np.asarray(Y)
    if Phi.ndim == 2:
        Phi = Phi[:, None, :]
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d2, D = Phi.shape
    lam = np.ones(d2) if Lam is None else np.asarray(Lam, dtype=float)
    r = np.einsum("tkd,d->tk", Phi, theta) - Y
    g = np.einsum("tkd,k,tk->d", Phi.conj(), lam**2, r) / n + _penalty_gram(M, MtM, D) @ theta
    if extra is not None:
        g = g + extra @ theta / n
    return 2.0 * g


def _block_diag(mats):
    return linalg.block_diag(*mats) if mats else np.zeros((0, 0))


# ---------------------------------------------------------------------------
# additive model


@dataclass
class AdditiveModel:
    blocks: list
    columns: list
    theta: np.ndarray
    slices: list
    info: dict = field(default_factory=dict)

    def _design(self, X):
        X = np.asarray(X)
        return np.hstack([b.design(X[:, c]) for b, c in zip(self.blocks, self.columns)])

    def predict(self, X) -> np.ndarray:
        return (self._design(X) @ self.theta).real

    __call__ = predict

    def effect(self, j: int, x) -> np.ndarray:
        """Fitted effect curve of block ``j`` at the given raw inputs."""
        x = np.asarray(x)
        if x.ndim == 1:
            x = x[:, None]
        return (self.blocks[j].design(x) @ self.theta[self.slices[j]]).real


def additive_fit(blocks: Sequence[FeatureBlock], X, Y, lams, columns=None) -> AdditiveModel:
    """Additive fit with penalty ``sum_l lam_l ||M_l theta_l||^2``.

    ``columns[l]`` selects the input columns of block ``l`` (default: column ``l``).
    """
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    Y = np.asarray(Y, dtype=float).reshape(-1)
    blocks = list(blocks)
    lams = np.broadcast_to(np.asarray(lams, dtype=float), (len(blocks),))
    if np.any(lams <= 0):
        raise WeaKLError("block penalties must be positive")
    cols = [[j] for j in range(len(blocks))] if columns is None else [np.atleast_1d(c).tolist() for c in columns]
    for b, c in zip(blocks, cols):
        b.fit(X[:, c])
    Phi = np.hstack([b.design(X[:, c]) for b, c in zip(blocks, cols)])
    M = _block_diag([np.sqrt(l) * b.regularizer() for l, b in zip(lams, blocks)])
    fit = solve(Phi, Y, M=M)
    slices, start = [], 0
    for b in blocks:
        slices.append(slice(start, start + b.dim))
        start += b.dim
    return AdditiveModel(blocks, cols, fit.theta, slices, fit.info)


# ---------------------------------------------------------------------------
# online corrections and forecast combinations


def _time_design(u, m, G):
    """Rows ``(phi(t), g_1 phi(t), ...)`` conjugated; ``G`` is (n, p) multipliers."""
    F = np.conj(fourier_map(u, m))
    return np.hstack([F * G[:, [j]] for j in range(G.shape[1])])


@dataclass
class OnlineModel:
    effects: list
    m: int
    time_map: Rescaler
    theta: np.ndarray
    info: dict = field(default_factory=dict)

    def corrections(self, t) -> np.ndarray:
        """``(h_0(t), h_1(t), ...)`` as an (n, d+1) array."""
        F = np.conj(fourier_map(self.time_map(t), self.m))
        D = 2 * self.m + 1
        return np.column_stack([(F @ self.theta[j * D:(j + 1) * D]).real for j in range(len(self.effects) + 1)])

    def predict(self, t, X) -> np.ndarray:
        X = np.asarray(X)
        if X.ndim == 1:
            X = X[:, None]
        H = self.corrections(t)
        g = np.column_stack([f(X[:, j]) for j, f in enumerate(self.effects)])
        return H[:, 0] + np.sum((1.0 + H[:, 1:]) * g, axis=1)


def online_fit(effects: Sequence[Callable], t, X, Y, lams, m: int = 3, s: int = 2, time_map=None) -> OnlineModel:
    """Smooth time-varying corrections ``h_0 + sum (1 + h_l) g_l`` of fitted effects."""
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size == 0:
        raise WeaKLError("empty adaptation window")
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    Y = np.asarray(Y, dtype=float).reshape(-1)
    effects = list(effects)
    if X.shape[1] != len(effects):
        raise WeaKLError("one input column per effect is required")
    lams = np.broadcast_to(np.asarray(lams, dtype=float), (len(effects) + 1,))
    if np.any(lams <= 0):
        raise WeaKLError("penalties must be positive")
    tm = time_map or Rescaler.fit(t)
    g = np.column_stack([f(X[:, j]) for j, f in enumerate(effects)])
    W = Y - g.sum(axis=1)
    G = np.column_stack([np.ones(t.size), g])
    Phi = _time_design(tm(t), m, G)
    Dg = np.diag(sobolev_weights(m, s))
    M = _block_diag([np.sqrt(l) * Dg for l in lams])
    fit = solve(Phi, W, M=M)
    return OnlineModel(effects, m, tm, fit.theta, fit.info)


@dataclass
class Combination:
    p: int
    m: int
    time_map: Rescaler
    theta: np.ndarray
    info: dict = field(default_factory=dict)

    def weights(self, t) -> np.ndarray:
        F = np.conj(fourier_map(self.time_map(t), self.m))
        D = 2 * self.m + 1
        return np.column_stack([1.0 / self.p + (F @ self.theta[j * D:(j + 1) * D]).real for j in range(self.p)])

    def predict(self, t, experts) -> np.ndarray:
        return np.sum(self.weights(t) * np.asarray(experts).reshape(len(np.atleast_1d(t)), -1), axis=1)


def combine_forecasts(experts, Y, t, lams, m: int = 3, s: int = 2, time_map=None) -> Combination:
    """Time-varying expert weights ``1/p + h_l(t)``."""
    E = np.asarray(experts, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    Y = np.asarray(Y, dtype=float).reshape(-1)
    t = np.asarray(t, dtype=float).reshape(-1)
    if E.shape[0] == 0:
        raise WeaKLError("no data")
    if E.shape[0] != Y.size or t.size != Y.size:
        raise WeaKLError("experts, targets and times must have the same length")
    p = E.shape[1]
    lams = np.broadcast_to(np.asarray(lams, dtype=float), (p,))
    if np.any(lams <= 0):
        raise WeaKLError("penalties must be positive")
    tm = time_map or Rescaler.fit(t)
    W = Y - E.mean(axis=1)
    Phi = _time_design(tm(t), m, E)
    Dg = np.diag(sobolev_weights(m, s))
    M = _block_diag([np.sqrt(l) * Dg for l in lams])
    fit = solve(Phi, W, M=M)
    return Combination(p, m, tm, fit.theta, fit.info)


# ---------------------------------------------------------------------------
# linear constraints


def constraint_projector(P, rtol: float = 1e-10) -> np.ndarray:
    """Orthogonal projector ``I - P (P^* P)^{-1} P^*`` onto the complement of ``Im(P)``."""
    P = np.asarray(P)
    if P.ndim == 1:
        P = P[:, None]
    G = P.conj().T @ P
    w = linalg.eigvalsh(G)
    if w[0] <= rtol * max(w[-1], 1e-300):
        raise WeaKLError("P is not injective")
    C = np.eye(P.shape[0]) - P @ linalg.solve(G, P.conj().T, assume_a="her")
    return 0.5 * (C + C.conj().T)


# ---------------------------------------------------------------------------
# hierarchies


@dataclass
class SummationMatrix:
    """``Y = S Y_b`` with the bottom nodes listed first."""

    S: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.ndim != 2 or S.shape[0] < S.shape[1]:
            raise WeaKLError("S must be (total nodes) x (bottom nodes)")
        l2 = S.shape[1]
        if not np.array_equal(S[:l2], np.eye(l2)):
            raise WeaKLError("the top block of S must be the identity")
        if not np.all(np.isin(S, (0.0, 1.0))):
            raise WeaKLError("S must be a 0/1 matrix")
        if np.any(S.sum(axis=1) == 0):
            raise WeaKLError("every node must aggregate at least one bottom node")
        self.S = S

    @property
    def n_total(self) -> int:
        return self.S.shape[0]

    @property
    def n_bottom(self) -> int:
        return self.S.shape[1]

    @classmethod
    def from_parents(cls, parents: Sequence[int | None], n_bottom: int) -> "SummationMatrix":
        """Build from a parent list over all nodes (bottom nodes first, root has None)."""
        l1 = len(parents)
        S = np.zeros((l1, n_bottom))
        for b in range(n_bottom):
            node = b
            seen = set()
            while node is not None:
                if node in seen:
                    raise WeaKLError("parent list has a cycle")
                seen.add(node)
                S[node, b] = 1.0
                node = parents[node]
        return cls(S)


def _node_blocks(designs):
    dims = [X.shape[1] for X in designs]
    starts = np.concatenate([[0], np.cumsum(dims)])
    return dims, starts


def _weighted_normal(designs, W):
    """``sum_t Phi_t^* W Phi_t`` for block-diagonal ``Phi_t`` with node designs."""
    dims, st = _node_blocks(designs)
    A = np.zeros((st[-1], st[-1]), dtype=complex)
    for a, Xa in enumerate(designs):
        for b, Xb in enumerate(designs):
            if W[a, b] != 0:
                A[st[a]:st[a + 1], st[b]:st[b + 1]] = W[a, b] * (Xa.conj().T @ Xb)
    return A


def _weighted_moment(designs, R):
    """``sum_t Phi_t^* r_t`` where ``R`` is (n, nodes)."""
    return np.concatenate([X.conj().T @ R[:, a] for a, X in enumerate(designs)])


@dataclass
class HierFit:
    theta: np.ndarray
    designs_dims: list
    S: np.ndarray | None
    kind: str
    info: dict = field(default_factory=dict)

    def node_predictions(self, designs) -> np.ndarray:
        _, st = _node_blocks(designs)
        return np.column_stack(
            [(X @ self.theta[st[a]:st[a + 1]]).real for a, X in enumerate(designs)]
        )

    def predict(self, designs) -> np.ndarray:
        """All-node predictions, shape (n, total nodes)."""
        P = self.node_predictions(designs)
        if self.kind == "global":
            return P
        return P @ self.S.T


def _check_designs(designs, n_nodes, Y=None):
    designs = [np.asarray(X) for X in designs]
    if len(designs) != n_nodes:
        raise WeaKLError(f"expected {n_nodes} node designs, got {len(designs)}")
    n = designs[0].shape[0]
    if any(X.shape[0] != n for X in designs):
        raise WeaKLError("node designs have different lengths")
    if Y is not None and np.asarray(Y).shape[0] != n:
        raise WeaKLError("targets and designs have different lengths")
    return designs, n


def _diag(v, size, name):
    v = np.asarray(v, dtype=float)
    if v.ndim == 2:
        if not np.allclose(v, np.diag(np.diag(v))):
            raise WeaKLError(f"{name} must be diagonal")
        v = np.diag(v)
    v = np.broadcast_to(v, (size,)).astype(float)
    if np.any(v < 0):
        raise WeaKLError(f"{name} must be non-negative")
    return v


def hier_bu(S: SummationMatrix, designs, Y, Lam, MtM=None, extra=None) -> HierFit:
    """Bottom-node coefficients fitted against every level of the hierarchy.

    ``designs[l]`` is the (n, D_l) feature matrix of bottom node ``l``, ``Y`` is
    (n, total nodes), ``Lam`` the per-node trust weights and ``MtM`` the
    penalty Gram ``M^* M``. ``extra`` is added to the normal matrix unscaled.
    """
    if not isinstance(S, SummationMatrix):
        S = SummationMatrix(S)
    designs, n = _check_designs(designs, S.n_bottom, Y)
    Y = np.asarray(Y, dtype=float)
    if Y.shape[1] != S.n_total:
        raise WeaKLError("Y must have one column per node")
    lam2 = _diag(Lam, S.n_total, "Lam") ** 2
    W = S.S.T @ (lam2[:, None] * S.S)
    A = _weighted_normal(designs, W)
    dim = A.shape[0]
    A = A + n * (np.zeros((dim, dim)) if MtM is None else np.asarray(MtM))
    if extra is not None:
        A = A + extra
    b = _weighted_moment(designs, (Y * lam2) @ S.S)
    info = {}
    theta = _solve_hpd(A, b, info)
    return HierFit(theta, [X.shape[1] for X in designs], S.S, "bottom_up", info)


def hier_global(S: SummationMatrix, designs, Y, Gamma, MtM=None) -> HierFit:
    """Coefficients for every node with a coherence penalty ``||Gamma (S Pi_b - I) Phi theta||^2``."""
    if not isinstance(S, SummationMatrix):
        S = SummationMatrix(S)
    designs, n = _check_designs(designs, S.n_total, Y)
    Y = np.asarray(Y, dtype=float)
    g2 = _diag(Gamma, S.n_total, "Gamma") ** 2
    Pb = np.zeros((S.n_bottom, S.n_total))
    Pb[:, : S.n_bottom] = np.eye(S.n_bottom)
    E = S.S @ Pb - np.eye(S.n_total)
    W = np.eye(S.n_total) + E.T @ (g2[:, None] * E)
    A = _weighted_normal(designs, W)
    dim = A.shape[0]
    A = A + n * (np.zeros((dim, dim)) if MtM is None else np.asarray(MtM))
    b = _weighted_moment(designs, Y)
    info = {}
    theta = _solve_hpd(A, b, info)
    return HierFit(theta, [X.shape[1] for X in designs], S.S, "global", info)


def transfer_penalty(dims, J, alpha) -> np.ndarray:
    """``Pi_J^* (I - P_J) Pi_J`` with ``P_J`` the projector on ``Im((alpha_j I_D)_j)``."""
    J = list(J)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (len(J),))
    if np.any(alpha == 0):
        raise WeaKLError("transfer weights must be non-zero")
    D = {dims[j] for j in J}
    if len(D) != 1:
        raise WeaKLError("nodes in J must share the same block dimension")
    D = D.pop()
    starts = np.concatenate([[0], np.cumsum(dims)])
    MJ = np.vstack([a * np.eye(D) for a in alpha])
    C = constraint_projector(MJ)
    Pi = np.zeros((D * len(J), starts[-1]))
    for i, j in enumerate(J):
        Pi[i * D:(i + 1) * D, starts[j]:starts[j] + D] = np.eye(D)
    return Pi.T @ C @ Pi


def hier_transfer(S: SummationMatrix, designs, Y, Lam, J, alpha=1.0, lam: float = 1.0, MtM=None) -> HierFit:
    """Bottom-up fit plus ``lam ||(I - P_J) Pi_J theta||^2`` tying the blocks in ``J``."""
    if lam < 0:
        raise WeaKLError("lam must be non-negative")
    dims = [np.asarray(X).shape[1] for X in designs]
    n = np.asarray(designs[0]).shape[0]
    extra = n * lam * transfer_penalty(dims, J, alpha) if lam > 0 else None
    fit = hier_bu(S, designs, Y, Lam, MtM=MtM, extra=extra)
    fit.kind = "transfer"
    return fit


def ols_infeasible(n: int, p: int, ratio: float = 10.0) -> bool:
    """Flag an OLS fit with ``p`` features on ``n`` points as unusable.

    The excess risk of OLS grows like ``n / (n - p - 1)``; the fit is flagged
    when that factor exceeds ``ratio`` or ``p >= n``.
    """
    if p + 1 >= n:
        return True
    return n / (n - p - 1) > ratio
