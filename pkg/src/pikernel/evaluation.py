"""Forecast metrics, block bootstrap, skill score and grid search."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import _accel
from .datagen import rng_for

__all__ = [
    "metrics",
    "BootstrapConfig",
    "BootstrapResult",
    "block_bootstrap",
    "SkillResult",
    "skill_score",
    "GridResult",
    "grid_search",
]


def metrics(y, yhat) -> dict:
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.shape != yhat.shape:
        raise ValueError("y and yhat have different lengths")
    if y.size == 0:
        raise ValueError("empty series")
    e = yhat - y
    out = {"RMSE": float(np.sqrt(np.mean(e**2))), "MAE": float(np.mean(np.abs(e)))}
    if np.any(y == 0):
        raise ValueError("MAPE is undefined for a zero target")
    out["MAPE"] = float(np.mean(np.abs(e) / np.abs(y)))
    return out


@dataclass
class BootstrapConfig:
    block: int | None = None
    replicates: int = 1000
    mode: str = "moving_block"
    seed: int = 0
    level: float = 0.9

    def __post_init__(self):
        if self.block is not None and self.block < 1:
            raise ValueError("block length must be at least 1")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if self.mode not in ("moving_block", "stationary"):
            raise ValueError("mode must be 'moving_block' or 'stationary'")
        if not 0 < self.level < 1:
            raise ValueError("level must be in (0, 1)")

    def block_length(self, n: int) -> int:
        return self.block if self.block is not None else max(1, int(math.floor(n**0.25)))


@dataclass
class BootstrapResult:
    estimate: np.ndarray
    replicates: np.ndarray
    ci: tuple
    config: BootstrapConfig
    n: int
    info: dict = field(default_factory=dict)

    def std(self) -> np.ndarray:
        return np.std(self.replicates, axis=0, ddof=1) if len(self.replicates) > 1 else np.zeros_like(self.estimate)

    def to_json(self) -> str:
        return json.dumps(
            {
                "estimate": np.atleast_1d(self.estimate).tolist(),
                "ci_low": np.atleast_1d(self.ci[0]).tolist(),
                "ci_high": np.atleast_1d(self.ci[1]).tolist(),
                "replicates": int(len(self.replicates)),
                "config": asdict(self.config),
                "n": self.n,
            }
        )


# ---------------------------------------------------------------------------
# resampled means


@_accel.njit
def _mb_means_nb(Z, starts, ell):
    n, k = Z.shape
    B, b = starts.shape
    out = np.zeros((B, k))
    for r in range(B):
        filled = 0
        for j in range(b):
            s = starts[r, j]
            for i in range(ell):
                if filled == n:
                    break
                for c in range(k):
                    out[r, c] += Z[s + i, c]
                filled += 1
        for c in range(k):
            out[r, c] /= n
    return out


def _mb_means_np(Z, starts, ell):
    n, k = Z.shape
    B, b = starts.shape
    cs = np.vstack([np.zeros((1, k)), np.cumsum(Z, axis=0)])
    full = n // ell
    part = n - full * ell
    tot = (cs[starts[:, :full] + ell] - cs[starts[:, :full]]).sum(axis=1)
    if part:
        tot += cs[starts[:, full] + part] - cs[starts[:, full]]
    return tot / n


@_accel.njit
def _st_means_nb(Z, starts, lengths):
    # circular blocks of variable length until n values are collected
    n, k = Z.shape
    B, b = starts.shape
    out = np.zeros((B, k))
    for r in range(B):
        filled = 0
        j = 0
        while filled < n:
            s = starts[r, j]
            L = lengths[r, j]
            for i in range(L):
                if filled == n:
                    break
                p = (s + i) % n
                for c in range(k):
                    out[r, c] += Z[p, c]
                filled += 1
            j += 1
        for c in range(k):
            out[r, c] /= n
    return out


def _st_means_np(Z, starts, lengths):
    n, k = Z.shape
    B = starts.shape[0]
    out = np.empty((B, k))
    for r in range(B):
        cum = np.cumsum(lengths[r])
        nb = int(np.searchsorted(cum, n)) + 1
        L = lengths[r, :nb].copy()
        L[-1] -= cum[nb - 1] - n
        idx = np.concatenate([np.arange(s, s + l) for s, l in zip(starts[r, :nb], L)]) % n
        out[r] = Z[idx].mean(axis=0)
    return out


def resample_means(Z, cfg: BootstrapConfig) -> np.ndarray:
    """Bootstrap replicates of the column means of ``Z`` (n, k)."""
    Z = np.ascontiguousarray(np.asarray(Z, dtype=float))
    if Z.ndim == 1:
        Z = Z[:, None]
    n = Z.shape[0]
    ell = cfg.block_length(n)
    rng = rng_for(cfg.seed)
    if cfg.mode == "moving_block":
        if n < ell:
            raise ValueError(f"series of length {n} is shorter than the block length {ell}")
        b = n // ell + 1
        starts = rng.integers(0, n - ell + 1, size=(cfg.replicates, b))
        fn = _mb_means_nb if _accel.USE_NUMBA else _mb_means_np
        return fn(Z, starts, ell)
    # stationary: geometric lengths with mean ell; enough blocks for every replicate
    nb = max(4, int(3 * n / ell) + 10)
    while True:
        lengths = rng.geometric(1.0 / ell, size=(cfg.replicates, nb))
        if np.all(lengths.sum(axis=1) >= n):
            break
        nb *= 2
    starts = rng.integers(0, n, size=(cfg.replicates, nb))
    fn = _st_means_nb if _accel.USE_NUMBA else _st_means_np
    return fn(Z, starts, lengths.astype(np.int64))


def block_bootstrap(Z, statistic: Callable | None = None, cfg: BootstrapConfig | None = None) -> BootstrapResult:
    """Bootstrap ``statistic(mean of resampled Z)`` with percentile intervals."""
    cfg = cfg or BootstrapConfig()
    Zarr = np.asarray(Z, dtype=float)
    Z2 = Zarr[:, None] if Zarr.ndim == 1 else Zarr
    g = statistic or (lambda m: m)
    means = resample_means(Z2, cfg)
    reps = np.array([np.asarray(g(m if Zarr.ndim > 1 else m[0]), dtype=float) for m in means])
    est = np.asarray(g(Z2.mean(axis=0) if Zarr.ndim > 1 else Z2.mean()), dtype=float)
    a = (1 - cfg.level) / 2
    lo, hi = np.quantile(reps, [a, 1 - a], axis=0)
    return BootstrapResult(est, reps, (lo, hi), cfg, Z2.shape[0], {"block": cfg.block_length(Z2.shape[0])})


@dataclass
class SkillResult:
    skill: float
    std: float
    lower: float
    level: float
    replicates: np.ndarray


def skill_score(errors1, errors2, cfg: BootstrapConfig | None = None, level: float = 0.9) -> SkillResult:
    """``1 - MAE_1 / MAE_2`` with a one-sided lower bound from a paired bootstrap."""
    e1 = np.abs(np.asarray(errors1, dtype=float)).reshape(-1)
    e2 = np.abs(np.asarray(errors2, dtype=float)).reshape(-1)
    if e1.shape != e2.shape:
        raise ValueError("error series must have the same length")
    if np.mean(e2) == 0:
        raise ValueError("reference MAE is zero")
    cfg = cfg or BootstrapConfig()
    Z = np.column_stack([e1, e2])
    means = resample_means(Z, cfg)
    with np.errstate(divide="ignore", invalid="ignore"):
        reps = 1.0 - means[:, 0] / means[:, 1]
    reps = reps[np.isfinite(reps)]
    sk = 1.0 - e1.mean() / e2.mean()
    sd = float(np.std(reps, ddof=1)) if reps.size > 1 else 0.0
    z = stats.norm.ppf(level)
    return SkillResult(float(sk), sd, float(sk - z * sd), level, reps)


# ---------------------------------------------------------------------------
# tuning


@dataclass
class GridResult:
    best: dict
    best_score: float
    table: list


def grid_search(candidates: Sequence[dict], fit_fn: Callable, X, Y, train_idx, valid_idx) -> GridResult:
    """Pick the candidate with the lowest validation MSE (first one on ties).

    ``fit_fn(params, X_train, Y_train)`` must return a predictor ``X -> Y``.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("empty grid")
    tr = np.asarray(train_idx)
    va = np.asarray(valid_idx)
    if np.intersect1d(tr, va).size:
        raise ValueError("train and validation indices overlap")
    X = np.asarray(X)
    Y = np.asarray(Y)
    table = []
    best, best_score = None, np.inf
    for params in candidates:
        pred = fit_fn(params, X[tr], Y[tr])
        score = float(np.mean((np.asarray(pred(X[va])) - Y[va]) ** 2))
        table.append({**params, "valid_mse": score})
        if score < best_score:
            best, best_score = params, score
    return GridResult(best, best_score, table)
