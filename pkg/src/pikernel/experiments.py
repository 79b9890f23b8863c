"""End-to-end experiment runners shared by the CLI and the acceptance suite.

Each runner returns a plain dict of numbers so results can be reported,
serialized to JSON or compared against tolerances.
"""
from __future__ import annotations

import time
import warnings

import numpy as np

from . import datagen, schemes
from .diffops import parse_operator
from .domains import Cube, char_matrix
from .effdim import spectrum
from .freqgrid import FrequencyGrid
from .oracle1d import Oracle1DParams, eigen_brackets, kernel_exact
from .penalty import PenaltySpec, assemble_M
from .pikl import (
    Dataset,
    fit,
    fit_kernel_form,
    kernel_matrix,
    l2_error,
    l2_relative_error,
    predict,
    uniform_grid,
)
from .weakl import hier_bu, ols_infeasible

__all__ = [
    "run_convection",
    "run_wave",
    "run_schemes",
    "run_harmonic",
    "run_heat_hybrid",
    "run_heat4d",
    "run_brackets",
    "run_kernel_oracle",
    "run_hier_toy",
    "loglog_slope",
]


def loglog_slope(ns, errs) -> float:
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(errs, float)), 1)[0])


# ---------------------------------------------------------------------------
# PDE solving from boundary data


def run_convection(
    beta: float, n: int = 100, m: int = 20, lam: float = 1e-14, mu: float = 1e6, seed: int = 0, keep_model: bool = False
) -> dict:
    """Transport ``d_t f + beta d_x f = 0`` from ``n`` initial samples.

    Time runs over ``[-1/2, 1/2]`` inside a torus of half-width 1, space over
    ``[-pi, pi]`` with period ``2 pi``.
    """
    t0 = time.perf_counter()
    grid = FrequencyGrid(2, m, (1.0, np.pi))
    dom = Cube([0.5, np.pi])
    op = parse_operator(f"dt + {beta}*dx", 2, ("dt", "dx"))
    M = assemble_M(grid, op, dom, PenaltySpec(lam, mu, 1))
    g = datagen.gen_convection(n, beta, seed)
    model = fit(grid, M, g.data)
    pts = uniform_grid([-0.5, -np.pi], [0.5, np.pi], 101)
    err = l2_relative_error(model, g.truth, pts)
    out = {"beta": beta, "error": err, "runtime": time.perf_counter() - t0, "solver": model.info.get("solver")}
    if keep_model:
        out.update(model=model, truth=g.truth)
    return out


def run_wave(
    n: int, sigma: float = 0.0, seed: int = 0, lam: float = 1e-10, mu: float = 1e-3, m: int = 20, keep_model: bool = False
) -> dict:
    """Wave equation ``f_tt = 4 f_xx`` from initial, boundary and Taylor lines."""
    t0 = time.perf_counter()
    grid = FrequencyGrid(2, m, (1.0, 1.0))
    op = parse_operator("dt^2 - 4*dx^2", 2, ("dt", "dx"))
    M = assemble_M(grid, op, Cube([0.5, 0.5]), PenaltySpec(lam, mu, 2))
    g = datagen.gen_wave_boundary(n, sigma, seed, centered=True)
    model = fit(grid, M, g.data)
    pts = uniform_grid([-0.5, -0.5], [0.5, 0.5], 101)
    err = l2_relative_error(model, g.truth, pts)
    out = {"n": n, "sigma": sigma, "error": err, "runtime": time.perf_counter() - t0}
    if keep_model:
        out.update(model=model, truth=g.truth)
    return out


def run_schemes(n: int, sigma: float = 0.0, seed: int = 0, variants=None) -> dict:
    """Finite-difference baselines on the same total budget ``n = 2 l1 + l2``."""
    l1, l2 = schemes.split_budget(n)
    g = schemes.WaveGrid(l1, l2, sigma, seed)
    variants = variants or [("euler", None), ("rk4", "standard"), ("cn", "two_level")]
    out = {"l1": l1, "l2": l2, "courant": g.courant}
    for name, var in variants:
        r = schemes.run_scheme(name, g, var)
        key = name if var is None else f"{name}_{var}"
        out[key] = r.l2_relative_error
        out[key + "_diverged"] = r.diverged
    return out


# ---------------------------------------------------------------------------
# hybrid modeling


def run_harmonic(ns=(10, 31, 100, 316, 1000, 3162, 10000), reps: int = 5, m: int = 300, lam_scale: float = 1e-3, mu: float = 1.0) -> dict:
    """PIKL with the oscillator prior against OLS on the two exact solutions.

    ``lam = lam_scale / n``; the penalty uses the literal Sobolev weights.
    """
    t0 = time.perf_counter()
    L = np.pi
    grid = FrequencyGrid.centered(1, m, L)
    dom = Cube([L])
    C = char_matrix(dom, grid)
    op = parse_operator("d1^2 + d1 + 1", 1)
    f1, f2 = datagen.harmonic_basis()
    xs = np.linspace(-L, L, 2001)[:, None]
    ref = f1(xs[:, 0])
    pikl_err, ols_err = [], []
    for n in ns:
        e, o = [], []
        M = assemble_M(grid, op, dom, PenaltySpec(lam_scale / n, mu, 2, "isotropic_power"), C=C)
        for rep in range(reps):
            g = datagen.gen_harmonic(n, seed=1000 * rep + n)
            model = fit(grid, M, g.data)
            e.append(l2_error(model, lambda P: f1(P[:, 0]), xs))
            x = g.data.X[:, 0]
            A = np.column_stack([f1(x), f2(x)])
            c = np.linalg.lstsq(A, g.data.Y, rcond=None)[0]
            o.append(np.mean((c[0] * f1(xs[:, 0]) + c[1] * f2(xs[:, 0]) - ref) ** 2))
        pikl_err.append(float(np.mean(e)))
        ols_err.append(float(np.mean(o)))
    return {
        "ns": list(ns),
        "pikl": pikl_err,
        "ols": ols_err,
        "slope": loglog_slope(ns, pikl_err),
        "ols_slope": loglog_slope(ns, ols_err),
        "ratio": [p / q for p, q in zip(pikl_err, ols_err)],
        "runtime": time.perf_counter() - t0,
    }


def run_heat_hybrid(
    ns=(100, 1000, 10000), seeds=range(5), m: int = 10, mode: str = "isotropic_power", pde_weights=(1e-4, 1e4)
) -> dict:
    """PIKL, Sobolev-only and PDE-dominated estimators for an imperfect heat prior.

    Hyperparameters weigh the summed (not averaged) data term. The PDE-only
    estimator uses ``pde_weights = (lam, mu)``; a ratio of 1e8 is already at
    its limit, while much larger ratios exceed double precision.
    """
    t0 = time.perf_counter()
    L = np.pi
    grid = FrequencyGrid.centered(2, m, L)
    dom = Cube([L, L])
    C = char_matrix(dom, grid)
    op = parse_operator("d1 - d2^2", 2)
    pts = uniform_grid([-L, -L], [L, L], 101)
    out = {"ns": list(ns), "pikl": [], "sobolev": [], "pde": []}
    for n in ns:
        settings = {
            "pikl": (n ** (-2 / 3) / 10, 100 / n),
            "sobolev": (n ** (-2 / 3) / 10, 0.0),
            "pde": tuple(pde_weights),
        }
        for name, (lam, mu) in settings.items():
            M = assemble_M(grid, op, dom, PenaltySpec(lam, mu, 2, mode), C=C)
            e = []
            for seed in seeds:
                g = datagen.gen_heat_hybrid(n, seed)
                model = fit(grid, M, g.data, normalization="sum")
                e.append(l2_error(model, g.truth, pts))
            out[name].append(float(np.mean(e)))
    out["ratio"] = [p / min(s, d) for p, s, d in zip(out["pikl"], out["sobolev"], out["pde"])]
    out["runtime"] = time.perf_counter() - t0
    return out


def run_heat4d(ns=(100, 300, 1000, 3000, 10000, 30000), seeds=range(3), lam: float = 1e-6, mu: float = 1e-2, m: int = 3) -> dict:
    """Heat equation in dimension 4 learned from noisy initial and boundary data."""
    t0 = time.perf_counter()
    grid = FrequencyGrid.centered(4, m, 0.5)
    dom = Cube([0.5] * 4)
    C = char_matrix(dom, grid)
    op = parse_operator("d1 - d2^2 - d3^2 - d4^2", 4)
    M = assemble_M(grid, op, dom, PenaltySpec(lam, mu, 2), C=C)
    test = datagen.rng_for(999).uniform(-0.5, 0.5, (20000, 4))
    ref = datagen.heat4d_truth(test)
    const = float(np.mean(datagen.heat4d_truth(datagen.rng_for(5).uniform(-0.5, 0.5, (10**6, 4)))))
    const_err = float(np.sqrt(np.sum((const - ref) ** 2) / np.sum(ref**2)))
    errs = []
    for n in ns:
        e = []
        for seed in seeds:
            g = datagen.gen_heat4d(n, seed)
            e.append(l2_relative_error(fit(grid, M, g.data), ref, test))
        errs.append(float(np.mean(e)))
    return {
        "ns": list(ns),
        "pikl": errs,
        "constant": const_err,
        "slope": loglog_slope(ns, errs),
        "runtime": time.perf_counter() - t0,
    }


# ---------------------------------------------------------------------------
# one-dimensional oracles


def run_brackets(lam: float = 0.01, mu: float = 1.0, m: int = 100, L: float = 1.0, kmax: int = 50, mode: str = "derivative_energy") -> dict:
    t0 = time.perf_counter()
    grid = FrequencyGrid.centered(1, m, L)
    dom = Cube([L])
    C = char_matrix(dom, grid)
    M = assemble_M(grid, parse_operator("d1", 1), dom, PenaltySpec(lam, mu, 1, mode), C=C)
    ev = spectrum(C, M)
    k = np.arange(3, kmax + 1)
    lo, hi = eigen_brackets(Oracle1DParams(lam, mu, L), k)
    vals = ev[k - 1]
    inside = (vals >= lo) & (vals <= hi)
    return {
        "k": k.tolist(),
        "eigenvalues": vals.tolist(),
        "lower": lo.tolist(),
        "upper": hi.tolist(),
        "all_inside": bool(np.all(inside)),
        "violations": k[~inside].tolist(),
        "runtime": time.perf_counter() - t0,
    }


def run_kernel_oracle(m: int = 400, lam: float = 1.0, mu: float = 1.0, L: float = 1.0, n_fit: int = 100, seed: int = 0) -> dict:
    """Fourier kernel against the closed form, plus feature vs kernel-form fits."""
    t0 = time.perf_counter()
    grid = FrequencyGrid.centered(1, m, L)
    dom = Cube([L])
    C = char_matrix(dom, grid)
    op = parse_operator("d1", 1)
    x = np.linspace(-L, L, 21)
    exact = kernel_exact(Oracle1DParams(lam, mu, L), x[:, None], x[None, :])
    gaps = {}
    for mode in ("domain", "derivative_energy"):
        M = assemble_M(grid, op, dom, PenaltySpec(lam, mu, 1, mode), C=C)
        K = kernel_matrix(grid, M, x[:, None], x[:, None]).real
        gaps[mode] = float(np.max(np.abs(K - exact)))
    M = assemble_M(grid, op, dom, PenaltySpec(lam, mu, 1, "domain"), C=C)
    rng = datagen.rng_for(seed)
    X = rng.uniform(-L, L, n_fit)
    Y = np.sin(2 * X) + 0.1 * rng.standard_normal(n_fit)
    data = Dataset(X[:, None], Y)
    xt = np.linspace(-L, L, 201)[:, None]
    p_feat = predict(fit(grid, M, data), xt)
    p_kern = fit_kernel_form(grid, M, data)(xt)
    rel = float(np.linalg.norm(p_feat - p_kern) / np.linalg.norm(p_kern))
    return {
        "sup_gap": gaps["domain"],
        "sup_gap_torus_sobolev": gaps["derivative_energy"],
        "fit_path_rel_diff": rel,
        "runtime": time.perf_counter() - t0,
    }


# ---------------------------------------------------------------------------
# hierarchical toy


def _ols(X, y):
    return np.linalg.lstsq(X, y, rcond=None)[0]


def hier_toy_draw(toy) -> dict:
    """Total test MSE (sum over the three nodes) of BU, Rec, MinT and WeaKL."""
    T = toy
    a1 = _ols(T.X1, T.Y[:, 0])
    a2 = _ols(T.X2, T.Y[:, 1])
    X = np.hstack([T.X1, T.X2])
    a3 = _ols(X, T.Y[:, 2])
    Xt = np.hstack([T.X1_test, T.X2_test])
    b1, b2 = T.X1_test @ a1, T.X2_test @ a2
    bu = np.column_stack([b1, b2, b1 + b2])
    # reconciliation works in the aggregate-first order
    S = T.S_sum_first
    indep = np.column_stack([Xt @ a3, b1, b2])
    rec = (S @ np.linalg.solve(S.T @ S, S.T) @ indep.T).T
    res = np.column_stack([X @ a3, T.X1 @ a1, T.X2 @ a2]) - T.Y[:, [2, 0, 1]]
    W = np.cov(res.T)
    J = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    U = np.array([[-1.0], [1.0], [1.0]])
    G = J - J @ W @ U @ np.linalg.solve(U.T @ W @ U, U.T)
    mint = (S @ G @ indep.T).T
    lam = T.sigma2**-2
    wk = hier_bu(T.S, [T.X1, T.X2], T.Y, [1.0, 1.0, np.sqrt(lam)]).predict([T.X1_test, T.X2_test])
    Yt = T.Y_test

    def mse(P):
        return float(np.sum(np.mean((P - Yt) ** 2, axis=0)))

    return {"bu": mse(bu), "rec": mse(rec[:, [1, 2, 0]]), "mint": mse(mint[:, [1, 2, 0]]), "weakl": mse(wk)}


def run_hier_toy(d: int = 20, sigmas=tuple(np.round(np.arange(1, 11) / 10, 1)), reps: int = 1000, n_train: int = 80, n_test: int = 20) -> dict:
    t0 = time.perf_counter()
    rows = []
    for s2 in sigmas:
        acc = {"bu": 0.0, "rec": 0.0, "mint": 0.0, "weakl": 0.0}
        for r in range(reps):
            res = hier_toy_draw(datagen.gen_hier_toy(d, n_train, n_test, float(s2), seed=r))
            for k in acc:
                acc[k] += res[k] / reps
        acc["sigma2"] = float(s2)
        acc["gain"] = 1.0 - acc["weakl"] / acc["bu"]
        rows.append(acc)
    return {
        "d": d,
        "rows": rows,
        "rec_infeasible": ols_infeasible(n_train, 2 * d),
        "mean_gain": float(np.mean([r["gain"] for r in rows])),
        "runtime": time.perf_counter() - t0,
    }
