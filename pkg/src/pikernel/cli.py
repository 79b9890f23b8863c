"""Command-line interface.

Every command reads a versioned TOML config (unknown keys are errors), writes
machine-readable outputs plus a ``manifest.json`` holding the fully resolved
config; ``pikernel rerun manifest.json`` repeats the run bit for bit.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, _accel, datagen, experiments
from .config import CONFIG_VERSION, ConfigError, check_keys, check_version, load_recipe, load_toml, recipe_names
from .diffops import OperatorError, parse_operator
from .domains import DomainError, domain_from_dict
from .freqgrid import FrequencyGrid
from .io import load_model, read_table, save_model, write_table
from .penalty import PenaltySpec, assemble_M
from .pikl import Dataset, NumericalError, fit, predict

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 1, 2, 3


class AcceptanceFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# config resolution
#
# A schema maps section -> (allowed keys, required keys, defaults). ``None``
# in place of the triple passes the table through for a dedicated validator.


def resolve(cfg: dict, schema: dict, base: Path | None = None) -> dict:
    check_version(cfg)
    check_keys(cfg, set(schema) | {"version"}, "top level")
    out = {"version": CONFIG_VERSION}
    for name, spec in schema.items():
        if spec is None:
            if name in cfg:
                out[name] = cfg[name]
            continue
        allowed, required, defaults = spec
        if name not in cfg:
            if required:
                raise ConfigError(f"missing required section [{name}]")
            out[name] = dict(defaults)
            continue
        sec = check_keys(cfg[name], allowed, name, required)
        out[name] = {**defaults, **sec}
    if base is not None:
        for sec in out.values():
            if isinstance(sec, dict):
                for key in ("path", "hierarchy", "valid"):
                    if isinstance(sec.get(key), str):
                        sec[key] = str((base / sec[key]).resolve())
    return out


_GRID = ({"m", "B", "L", "phase", "d"}, {"m"}, {"phase": 1})
_PENALTY = (
    {"lam", "mu", "s", "sobolev_mode", "normalization", "floor"},
    {"lam"},
    {"mu": 0.0, "s": 1, "sobolev_mode": "derivative_energy", "normalization": "mean", "floor": 1e-8},
)
_OPERATOR = ({"expr", "axes"}, {"expr"}, {})

FIT_SCHEMA = {
    "data": ({"path", "x", "y", "valid"}, {"path", "x", "y"}, {}),
    "grid": _GRID,
    "operator": _OPERATOR,
    "domain": None,
    "penalty": _PENALTY,
}

PDE_SCHEMA = {
    "problem": ({"kind", "beta", "n", "sigma", "m", "lam", "mu", "seed"}, {"kind", "n"}, {"seed": 0, "m": 20}),
    "baselines": ({"n", "schemes"}, (), {"schemes": []}),
    "expect": ({"max_error", "max_runtime", "beats"}, (), {}),
    "output": ({"field", "field_points"}, (), {"field": True, "field_points": 101}),
}

EFFDIM_SCHEMA = {
    "grid": _GRID,
    "operator": _OPERATOR,
    "domain": None,
    "effdim": (
        {"n_grid", "s", "sobolev_mode", "kappa", "schedule", "lam", "mu"},
        {"n_grid"},
        {"s": 1, "sobolev_mode": "derivative_energy", "kappa": 1.0, "schedule": "log"},
    ),
}

_SPLIT = ({"valid_fraction"}, (), {"valid_fraction": 0.2})

WEAKL_SCHEMAS = {
    "additive": {
        "data": ({"path", "y"}, {"path", "y"}, {}),
        "blocks": None,
        "split": _SPLIT,
    },
    "online": {
        "data": ({"path", "t", "y", "effects"}, {"path", "t", "y", "effects"}, {}),
        "model": ({"lams", "m", "s"}, (), {"lams": [1.0], "m": 3, "s": 2}),
        "split": _SPLIT,
    },
    "combine": {
        "data": ({"path", "t", "y", "experts"}, {"path", "t", "y", "experts"}, {}),
        "model": ({"lams", "m", "s"}, (), {"lams": [1.0], "m": 3, "s": 2}),
        "split": _SPLIT,
    },
}
_HIER = {
    "data": (
        {"source", "path", "hierarchy", "features", "d", "n_train", "n_test", "sigma2", "seed", "reps"},
        {"source"},
        {},
    ),
    "model": ({"Lam", "ridge", "Gamma", "J", "alpha", "lam"}, (), {"Lam": "auto", "ridge": 0.0}),
    "split": ({"n_test"}, (), {}),
}
for _k in ("hier-bu", "hier-g", "hier-t"):
    WEAKL_SCHEMAS[_k] = _HIER


def _grid(sec: dict, d: int) -> FrequencyGrid:
    if "d" in sec and int(sec["d"]) != d:
        raise ConfigError(f"[grid] d = {sec['d']} but the problem has dimension {d}")
    if "B" in sec:
        B = np.broadcast_to(np.asarray(sec["B"], float), (d,))
    elif "L" in sec:
        B = 2.0 * np.broadcast_to(np.asarray(sec["L"], float), (d,))
    else:
        raise ConfigError("[grid] needs either 'B' (half-period) or 'L' (domain half-width)")
    try:
        return FrequencyGrid(d, int(sec["m"]), tuple(float(b) for b in B), int(sec["phase"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[grid] {exc}") from None


def _physics(cfg: dict, grid: FrequencyGrid):
    if "domain" not in cfg:
        raise ConfigError("missing required section [domain]")
    try:
        dom = domain_from_dict(cfg["domain"])
        op = parse_operator(str(cfg["operator"]["expr"]), grid.d, cfg["operator"].get("axes"))
    except (DomainError, OperatorError) as exc:
        raise ConfigError(str(exc)) from None
    if dom.dim != grid.d:
        raise ConfigError(f"[domain] has dimension {dom.dim}, the grid has {grid.d}")
    return op, dom


def _penalty_spec(p: dict) -> PenaltySpec:
    try:
        return PenaltySpec(float(p["lam"]), float(p["mu"]), int(p["s"]), str(p["sobolev_mode"]), float(p["floor"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[penalty] {exc}") from None


def _load_config(path: str, schema: dict) -> dict:
    p = Path(path)
    return resolve(load_toml(p), schema, p.parent)


# ---------------------------------------------------------------------------
# output helpers


class Run:
    """Output directory, recorded outputs and the manifest.

    Timings go to the manifest only, so outputs of a rerun are byte-identical.
    """

    started: float | None = None

    def __init__(self, command: str, config: dict, outdir: Path, seeds=()):
        self.command = command
        self.config = config
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.outputs: dict[str, str] = {}
        self.seeds = list(seeds)
        self.timings: dict[str, float] = {}
        self.t0 = Run.started if Run.started is not None else time.perf_counter()

    def path(self, name: str) -> Path:
        p = self.outdir / name
        self.outputs[name] = str(p)
        return p

    def write_json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(_finite(obj), indent=1, sort_keys=True, default=_default) + "\n")

    def manifest(self) -> dict:
        doc = {
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "library_version": __version__,
            "backend": _accel.backend(),
            "wall_time": time.perf_counter() - self.t0,
            "timings": self.timings,
            "outputs": sorted(self.outputs.values()),
        }
        (self.outdir / "manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True, default=_default) + "\n")
        return doc


def _finite(o):
    """Strict JSON: non-finite floats become the strings 'inf', '-inf', 'nan'."""
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, (float, np.floating)) and not np.isfinite(o):
        return str(float(o))
    return o


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o)}")


def _metrics(y, yhat) -> dict:
    from .evaluation import metrics

    m = metrics(y, yhat) if np.all(np.asarray(y) != 0) else {
        "rmse": float(np.sqrt(np.mean((yhat - y) ** 2))),
        "mae": float(np.mean(np.abs(yhat - y))),
    }
    return {k: float(v) for k, v in m.items()}


def _chrono_split(n: int, frac: float):
    if not 0 < frac < 1:
        raise ConfigError("[split] valid_fraction must lie in (0, 1)")
    nv = max(1, int(round(frac * n)))
    if nv >= n:
        raise ConfigError("not enough rows for a train/validation split")
    return np.arange(n - nv), np.arange(n - nv, n)


# ---------------------------------------------------------------------------
# fit / predict


def cmd_fit(cfg: dict, outdir: Path) -> dict:
    d = cfg["data"]
    xcols = [d["x"]] if isinstance(d["x"], str) else list(d["x"])
    tab = read_table(d["path"], xcols + [d["y"]])
    X = np.column_stack([tab[c] for c in xcols])
    data = Dataset(X, tab[d["y"]])
    grid = _grid(cfg["grid"], X.shape[1])
    op, dom = _physics(cfg, grid)
    pen = cfg["penalty"]
    M = assemble_M(grid, op, dom, _penalty_spec(pen))
    model = fit(grid, M, data, normalization=pen["normalization"])
    run = Run("fit", cfg, outdir)
    meta = {"x": xcols, "y": d["y"], "operator": str(op), "n": data.n, "solver": model.info.get("solver")}
    save_model(run.path("model.json"), grid, model.theta, meta)
    met = {"train": _metrics(data.Y, predict(model, X)), "normal_residual": model.info["normal_residual"], "n": data.n}
    if "valid" in d:
        vt = read_table(d["valid"], xcols + [d["y"]])
        Xv = np.column_stack([vt[c] for c in xcols])
        met["valid"] = _metrics(vt[d["y"]], predict(model, Xv))
    run.write_json("metrics.json", met)
    return run.manifest()


def cmd_predict(model_path, data_path, out_path, columns=None) -> None:
    grid, theta, meta = load_model(model_path)
    cols = columns or meta.get("x")
    if not cols:
        raise ConfigError("model has no recorded input columns; pass --x")
    tab = read_table(data_path, cols)
    X = np.column_stack([tab[c] for c in cols])
    yhat = grid.evaluate(theta, X).real
    write_table(out_path, {**{c: tab[c] for c in cols}, "yhat": yhat})


# ---------------------------------------------------------------------------
# pde-solve


_KIND_KEYS = {
    "convection": {"beta", "n", "m", "lam", "mu", "seed"},
    "wave": {"n", "sigma", "m", "lam", "mu", "seed"},
}


def cmd_pde_solve(cfg: dict, outdir: Path) -> dict:
    p = dict(cfg["problem"])
    kind = p.pop("kind")
    if kind not in _KIND_KEYS:
        raise ConfigError(f"[problem] kind must be one of {sorted(_KIND_KEYS)}, got {kind!r}")
    extra = set(p) - _KIND_KEYS[kind]
    if extra:
        raise ConfigError(f"unknown key(s) in [problem] for kind {kind!r}: {', '.join(sorted(extra))}")
    if kind == "convection":
        if "beta" not in p:
            raise ConfigError("missing required field(s) in [problem]: beta")
        r = experiments.run_convection(float(p["beta"]), int(p["n"]), int(p["m"]), float(p.get("lam", 1e-14)),
                                       float(p.get("mu", 1e6)), int(p["seed"]), keep_model=True)
        lo, hi = [-0.5, -np.pi], [0.5, np.pi]
    else:
        r = experiments.run_wave(int(p["n"]), float(p.get("sigma", 0.0)), int(p["seed"]), float(p.get("lam", 1e-10)),
                                 float(p.get("mu", 1e-3)), int(p["m"]), keep_model=True)
        lo, hi = [-0.5, -0.5], [0.5, 0.5]
    run = Run("pde-solve", cfg, outdir, seeds=[int(p["seed"])])
    model, truth = r.pop("model"), r.pop("truth")
    save_model(run.path("model.json"), model.grid, model.theta, {"kind": kind, "axes": ["t", "x"]})
    if cfg["output"]["field"]:
        from .pikl import uniform_grid

        P = uniform_grid(lo, hi, int(cfg["output"]["field_points"]))
        write_table(run.path("field.csv"), {"t": P[:, 0], "x": P[:, 1], "pikl": predict(model, P), "reference": truth(P)})
    report = {"kind": kind, "pikl_error": r["error"]}
    run.timings["pikl"] = r["runtime"]
    bl = cfg["baselines"]
    if bl["schemes"]:
        if kind != "wave":
            raise ConfigError("[baselines] finite-difference schemes exist for the wave problem only")
        variants = []
        for s in bl["schemes"]:
            name, _, var = str(s).partition(":")
            if name not in ("euler", "rk4", "cn"):
                raise ConfigError(f"[baselines] unknown scheme {s!r}")
            variants.append((name, var or ("standard" if name == "rk4" else "two_level" if name == "cn" else None)))
        sr = experiments.run_schemes(int(bl.get("n", p["n"])), float(p.get("sigma", 0.0)), int(p["seed"]), variants)
        report["baselines"] = sr
    run.write_json("report.json", report)
    man = run.manifest()
    failures = _check_expect(cfg["expect"], report, run.timings)
    if failures:
        raise AcceptanceFailure("; ".join(failures))
    return man


def _check_expect(exp: dict, report: dict, timings: dict) -> list[str]:
    out = []
    if "max_error" in exp and not report["pikl_error"] <= exp["max_error"]:
        out.append(f"PIKL error {report['pikl_error']:.3e} exceeds {exp['max_error']:.1e}")
    if "max_runtime" in exp and not timings["pikl"] <= exp["max_runtime"]:
        out.append(f"runtime {timings['pikl']:.1f} s exceeds {exp['max_runtime']} s")
    for b in exp.get("beats", []):
        other = report.get("baselines", {}).get(b)
        if other is None:
            out.append(f"baseline {b!r} was not run")
        elif not report["pikl_error"] <= other:
            out.append(f"PIKL error {report['pikl_error']:.3e} above {b} error {other:.3e}")
    return out


# ---------------------------------------------------------------------------
# effdim


def cmd_effdim(cfg: dict, outdir: Path) -> dict:
    from .effdim import curve_slope, default_schedule, effdim_curve, write_curve_csv

    if "d" not in cfg["grid"]:
        raise ConfigError("missing required field(s) in [grid]: d")
    grid = _grid(cfg["grid"], int(cfg["grid"]["d"]))
    op, dom = _physics(cfg, grid)
    e = cfg["effdim"]
    ns = [int(n) for n in e["n_grid"]]
    if e["schedule"] == "log":
        schedule = default_schedule
    elif e["schedule"] == "fixed":
        if "lam" not in e or "mu" not in e:
            raise ConfigError("[effdim] schedule 'fixed' needs lam and mu")
        schedule = lambda n: (float(e["lam"]), float(e["mu"]))  # noqa: E731
    else:
        raise ConfigError("[effdim] schedule must be 'log' or 'fixed'")
    try:
        reps = effdim_curve(grid, op, dom, ns, int(e["s"]), schedule, str(e["sobolev_mode"]), float(e["kappa"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    run = Run("effdim", cfg, outdir)
    write_curve_csv(reps, run.path("effdim.csv"))
    slope = curve_slope(reps) if len(reps) > 1 else None
    run.write_json("metrics.json", {"n": ns, "N": [r.N for r in reps], "slope": slope})
    return run.manifest()


# ---------------------------------------------------------------------------
# weakl


def _build_block(spec: dict, i: int):
    from .weakl import Categorical, Fourier, Linear

    where = f"blocks[{i}]"
    check_keys(spec, {"type", "column", "m", "s", "card", "lams"}, where, ("type", "column", "lams"))
    kind = spec["type"]
    if kind == "linear":
        return Linear()
    if kind == "fourier":
        if "m" not in spec:
            raise ConfigError(f"missing required field(s) in [{where}]: m")
        return Fourier(int(spec["m"]), int(spec.get("s", 2)))
    if kind == "categorical":
        if "card" not in spec:
            raise ConfigError(f"missing required field(s) in [{where}]: card")
        return Categorical(int(spec["card"]))
    raise ConfigError(f"[{where}] unknown block type {kind!r}")


def _weakl_additive(cfg, run):
    import itertools

    from .evaluation import grid_search
    from .weakl import additive_fit

    specs = cfg.get("blocks")
    if not specs or not isinstance(specs, list):
        raise ConfigError("missing required section [[blocks]]")
    blocks = [_build_block(b, i) for i, b in enumerate(specs)]
    cols = [b["column"] for b in specs]
    d = cfg["data"]
    tab = read_table(d["path"], list(dict.fromkeys(cols)) + [d["y"]])
    X = np.column_stack([tab[c] for c in cols])
    Y = tab[d["y"]]
    tr, va = _chrono_split(len(Y), float(cfg["split"]["valid_fraction"]))
    lam_lists = [np.atleast_1d(b["lams"]).astype(float).tolist() for b in specs]
    cands = [{f"lam{i}": v for i, v in enumerate(c)} for c in itertools.product(*lam_lists)]

    def fit_fn(params, Xtr, Ytr):
        return additive_fit(blocks, Xtr, Ytr, [params[f"lam{i}"] for i in range(len(blocks))]).predict

    gs = grid_search(cands, fit_fn, X, Y, tr, va)
    write_table(run.path("validation.csv"), {k: [row[k] for row in gs.table] for k in gs.table[0]})
    best = [gs.best[f"lam{i}"] for i in range(len(blocks))]
    model = additive_fit(blocks, X[tr], Y[tr], best)
    pred = model.predict(X)
    write_table(run.path("forecast.csv"), {"index": np.arange(len(Y)), "y": Y, "yhat": pred, "valid": np.isin(np.arange(len(Y)), va)})
    _save_theta(run, model.theta, {"kind": "additive", "lams": best, "columns": cols})
    return {"best": gs.best, "valid_mse": gs.best_score, "train": _metrics(Y[tr], pred[tr]), "valid": _metrics(Y[va], pred[va])}


def _save_theta(run, theta, meta):
    run.write_json("model.json", {"theta_real": np.real(theta).tolist(), "theta_imag": np.imag(theta).tolist(), "meta": meta})


def _weakl_online(cfg, run, combine: bool):
    from .weakl import Rescaler, combine_forecasts, online_fit

    d = cfg["data"]
    cols = list(d["experts"] if combine else d["effects"])
    tab = read_table(d["path"], [d["t"], d["y"]] + cols)
    t, Y = tab[d["t"]], tab[d["y"]]
    G = np.column_stack([tab[c] for c in cols])
    tr, va = _chrono_split(len(Y), float(cfg["split"]["valid_fraction"]))
    mo = cfg["model"]
    lams = np.broadcast_to(np.asarray(mo["lams"], float), (len(cols) + (0 if combine else 1),))
    # time stamps of the whole horizon are known in advance
    tm = Rescaler.fit(t)
    if combine:
        model = combine_forecasts(G[tr], Y[tr], t[tr], lams, int(mo["m"]), int(mo["s"]), tm)
        pred = model.predict(t, G)
        base = G.mean(axis=1)
    else:
        ident = [lambda x: x] * len(cols)
        model = online_fit(ident, t[tr], G[tr], Y[tr], lams, int(mo["m"]), int(mo["s"]), tm)
        pred = model.predict(t, G)
        base = G.sum(axis=1)
    write_table(run.path("forecast.csv"), {"t": t, "y": Y, "yhat": pred, "baseline": base, "valid": np.isin(np.arange(len(Y)), va)})
    _save_theta(run, model.theta, {"kind": "combine" if combine else "online", "columns": cols, "lams": lams.tolist()})
    return {
        "train": _metrics(Y[tr], pred[tr]),
        "valid": _metrics(Y[va], pred[va]),
        "valid_baseline": _metrics(Y[va], base[va]),
    }


def _hier_from_csv(d: dict):
    """Long-format CSV (node, t, y, features...) plus a node,parent CSV."""
    import csv

    for key in ("path", "hierarchy", "features"):
        if key not in d:
            raise ConfigError(f"missing required field(s) in [data]: {key}")
    parents = {}
    with open(d["hierarchy"], newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0][:2]] != ["node", "parent"]:
        raise ConfigError(f"{d['hierarchy']}: header must be 'node,parent'")
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ConfigError(f"{d['hierarchy']}:{lineno}: expected 2 fields")
        parents[row[0].strip()] = row[1].strip() or None
    for node, par in parents.items():
        if par is not None and par not in parents:
            raise ConfigError(f"{d['hierarchy']}: unknown parent node {par!r} (child {node!r})")
    feats = list(d["features"])
    with open(d["path"], newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = [h.strip() for h in next(rd, [])]
        for c in ["node", "t", "y"] + feats:
            if c not in header:
                raise ConfigError(f"{d['path']}: column {c!r} not in header {header}")
        ix = {c: header.index(c) for c in header}
        recs = {}
        for lineno, row in enumerate(rd, start=2):
            if not row:
                continue
            node = row[ix["node"]].strip()
            if node not in parents:
                raise ConfigError(f"{d['path']}:{lineno}: unknown node {node!r} (not in the hierarchy file)")
            try:
                recs[(node, float(row[ix["t"]]))] = (float(row[ix["y"]]), [float(row[ix[c]]) for c in feats])
            except ValueError:
                raise ConfigError(f"{d['path']}:{lineno}: non-numeric value") from None
    has_child = {p for p in parents.values() if p is not None}
    bottom = [v for v in parents if v not in has_child]
    order = bottom + [v for v in parents if v in has_child]
    pos = {v: i for i, v in enumerate(order)}
    times = sorted({t for _, t in recs})
    tpos = {t: j for j, t in enumerate(times)}
    Y = np.full((len(times), len(order)), np.nan)
    F = np.full((len(order), len(times), len(feats)), np.nan)
    for (node, t), (y, f) in recs.items():
        j = tpos[t]
        Y[j, pos[node]] = y
        F[pos[node], j] = f
    if np.isnan(Y).any() or np.isnan(F).any():
        raise ConfigError(f"{d['path']}: every node needs a row at every time index")
    from .weakl import SummationMatrix

    S = SummationMatrix.from_parents([None if parents[v] is None else pos[parents[v]] for v in order], len(bottom))
    # feature columns that are identically zero for a node are not part of its design
    designs = [np.column_stack([np.ones(len(times)), F[i][:, np.any(F[i] != 0, axis=0)]]) for i in range(len(order))]
    return order, np.asarray(times), S, designs, Y


def _hier_toy(d: dict):
    from .weakl import SummationMatrix

    toy = datagen.gen_hier_toy(int(d.get("d", 20)), int(d.get("n_train", 80)), int(d.get("n_test", 20)),
                               float(d.get("sigma2", 0.5)), int(d.get("seed", 0)))
    X1 = np.vstack([toy.X1, toy.X1_test])
    X2 = np.vstack([toy.X2, toy.X2_test])
    Y = np.vstack([toy.Y, toy.Y_test])
    designs = [X1, X2, np.hstack([X1, X2])]
    return ["y1", "y2", "total"], np.arange(len(Y), dtype=float), SummationMatrix(toy.S), designs, Y, toy


def _weakl_hier(cfg, run, kind):
    from .weakl import hier_bu, hier_global, hier_transfer

    d, mo = cfg["data"], cfg["model"]
    toy = None
    if d["source"] == "toy":
        names, times, S, designs, Y, toy = _hier_toy(d)
        n_test = int(d.get("n_test", 20))
    elif d["source"] == "csv":
        names, times, S, designs, Y = _hier_from_csv(d)
        n_test = int(cfg["split"].get("n_test", max(1, len(times) // 5)))
    else:
        raise ConfigError("[data] source must be 'toy' or 'csv'")
    n = len(times)
    if not 0 < n_test < n:
        raise ConfigError("n_test must leave at least one training row")
    tr, te = slice(0, n - n_test), slice(n - n_test, n)
    nb = S.n_bottom
    if mo["Lam"] == "auto":
        # trust each node by its inverse noise level when it is known
        Lam = np.ones(S.n_total)
        if toy is not None:
            Lam[-1] = 1.0 / toy.sigma2
    else:
        try:
            Lam = np.broadcast_to(np.asarray(mo["Lam"], float), (S.n_total,)).copy()
        except ValueError:
            raise ConfigError(f"[model] Lam must be 'auto', a number or one weight per node ({S.n_total})") from None
    ridge = float(mo["ridge"])
    bottom_designs = designs[:nb]
    dim = sum(X.shape[1] for X in bottom_designs)
    MtM = ridge * np.eye(dim) if ridge > 0 else None
    if kind == "hier-bu":
        fitted = hier_bu(S, [X[tr] for X in bottom_designs], Y[tr], Lam, MtM)
        pred = fitted.predict([X[te] for X in bottom_designs])
    elif kind == "hier-t":
        if "J" not in mo:
            raise ConfigError("missing required field(s) in [model]: J")
        J = [names.index(j) if isinstance(j, str) else int(j) for j in mo["J"]]
        fitted = hier_transfer(S, [X[tr] for X in bottom_designs], Y[tr], Lam, J, mo.get("alpha", 1.0),
                               float(mo.get("lam", 1.0)), MtM)
        pred = fitted.predict([X[te] for X in bottom_designs])
    else:
        Gamma = np.broadcast_to(np.asarray(mo.get("Gamma", 1.0), float), (S.n_total,))
        dim_all = sum(X.shape[1] for X in designs)
        fitted = hier_global(S, [X[tr] for X in designs], Y[tr], Gamma, ridge * np.eye(dim_all) if ridge > 0 else None)
        pred = fitted.predict([X[te] for X in designs])
    # independent per-bottom OLS summed up: the bottom-up benchmark
    bu = np.column_stack([X[te] @ np.linalg.lstsq(X[tr], Y[tr, i], rcond=None)[0] for i, X in enumerate(bottom_designs)])
    bu = bu @ S.S.T
    Yt = Y[te]
    mse = lambda P: np.mean((P - Yt) ** 2, axis=0)  # noqa: E731
    per_node = {nm: float(v) for nm, v in zip(names, mse(pred))}
    long = {"node": [], "t": [], "y": [], "yhat": [], "bottom_up": []}
    for i, nm in enumerate(names):
        long["node"] += [nm] * Yt.shape[0]
        long["t"] += times[te].tolist()
        long["y"] += Yt[:, i].tolist()
        long["yhat"] += pred[:, i].tolist()
        long["bottom_up"] += bu[:, i].tolist()
    write_table(run.path("forecast.csv"), long)
    _save_theta(run, fitted.theta, {"kind": kind, "nodes": names})
    out = {
        "nodes": names,
        "mse": per_node,
        "total_mse": float(np.sum(mse(pred))),
        "bottom_up_total_mse": float(np.sum(mse(bu))),
    }
    out["weakl_le_bottom_up"] = out["total_mse"] <= out["bottom_up_total_mse"]
    if toy is not None and kind == "hier-bu" and int(d.get("reps", 0)) > 0:
        mc = experiments.run_hier_toy(int(d.get("d", 20)), (float(d.get("sigma2", 0.5)),), int(d["reps"]),
                                      int(d.get("n_train", 80)), int(d.get("n_test", 20)))
        out["monte_carlo"] = mc["rows"][0]
        out["monte_carlo"]["rec_infeasible"] = mc["rec_infeasible"]
    return out


def cmd_weakl(sub: str, cfg: dict, outdir: Path) -> dict:
    seeds = [int(cfg["data"]["seed"])] if "seed" in cfg.get("data", {}) else []
    run = Run(f"weakl {sub}", cfg, outdir, seeds)
    if sub == "additive":
        met = _weakl_additive(cfg, run)
    elif sub in ("online", "combine"):
        met = _weakl_online(cfg, run, sub == "combine")
    else:
        met = _weakl_hier(cfg, run, sub)
    run.write_json("metrics.json", met)
    return run.manifest()


# ---------------------------------------------------------------------------
# gen


GEN_KINDS = ("harmonic", "heat-hybrid", "wave", "convection", "heat4d", "additive", "online", "hier-toy")


def cmd_gen(kind: str, n: int, seed: int, outdir: Path, sigma=None, beta: float = 20.0) -> dict:
    cfg = {"version": CONFIG_VERSION, "gen": {"kind": kind, "n": n, "seed": seed, "sigma": sigma, "beta": beta}}
    run = Run("gen", cfg, outdir, [seed])
    kw = {} if sigma is None else {"sigma": sigma}
    if kind == "harmonic":
        datagen.write_csv(datagen.gen_harmonic(n, seed, **kw).data, run.path("data.csv"), ["x"])
    elif kind == "heat-hybrid":
        datagen.write_csv(datagen.gen_heat_hybrid(n, seed, **kw).data, run.path("data.csv"), ["t", "x"])
    elif kind == "wave":
        datagen.write_csv(datagen.gen_wave_boundary(n, sigma or 0.0, seed, centered=True).data, run.path("data.csv"), ["t", "x"])
    elif kind == "convection":
        datagen.write_csv(datagen.gen_convection(n, beta, seed).data, run.path("data.csv"), ["t", "x"])
    elif kind == "heat4d":
        datagen.write_csv(datagen.gen_heat4d(n, seed, **kw).data, run.path("data.csv"), ["t", "x1", "x2", "x3"])
    elif kind == "additive":
        datagen.write_csv(datagen.gen_additive(n, seed, **kw).data, run.path("data.csv"), ["x1", "x2"])
    elif kind == "online":
        write_table(run.path("data.csv"), datagen.gen_online(n, seed, **kw))
    elif kind == "hier-toy":
        long, hier = datagen.hier_toy_long(datagen.gen_hier_toy(20, n, 0, sigma or 0.5, seed))
        write_table(run.path("data.csv"), long)
        p = run.path("hierarchy.csv")
        p.write_text("node,parent\n" + "".join(f"{a},{b or ''}\n" for a, b in hier))
    else:
        raise ConfigError(f"unknown generator {kind!r}; choose from {', '.join(GEN_KINDS)}")
    return run.manifest()


# ---------------------------------------------------------------------------
# bench


def report_schema() -> dict:
    return json.loads((resources.files("pikernel") / "schemas" / "report.schema.json").read_text())


def cmd_bench(outdir: Path, ids=None, quick: bool = False, echo=print) -> dict:
    import jsonschema

    from . import acceptance

    results = acceptance.run_all(ids, quick=quick, echo=echo)
    rep = acceptance.report(results, quick)
    jsonschema.validate(rep, report_schema())
    cfg = {"version": CONFIG_VERSION, "bench": {"criteria": [r.id for r in results], "quick": quick}}
    run = Run("bench", cfg, outdir, [0])
    run.write_json("acceptance_report.json", rep)
    run.timings.update({f"c{r.id}": r.runtime for r in results})
    man = run.manifest()
    if not rep["passed"]:
        failed = [str(r.id) for r in results if not r.passed]
        raise AcceptanceFailure(f"criteria failed: {', '.join(failed)}")
    return man


# ---------------------------------------------------------------------------
# dispatch


def _replay(manifest: dict, outdir: Path) -> dict:
    cmd, cfg = manifest["command"], manifest["config"]
    if cmd == "fit":
        return cmd_fit(resolve(cfg, FIT_SCHEMA), outdir)
    if cmd == "pde-solve":
        return cmd_pde_solve(resolve(cfg, PDE_SCHEMA), outdir)
    if cmd == "effdim":
        return cmd_effdim(resolve(cfg, EFFDIM_SCHEMA), outdir)
    if cmd.startswith("weakl "):
        sub = cmd.split()[1]
        return cmd_weakl(sub, resolve(cfg, WEAKL_SCHEMAS[sub]), outdir)
    if cmd == "gen":
        g = cfg["gen"]
        return cmd_gen(g["kind"], g["n"], g["seed"], outdir, g["sigma"], g["beta"])
    if cmd == "bench":
        b = cfg["bench"]
        return cmd_bench(outdir, b["criteria"], b["quick"])
    raise ConfigError(f"manifest has unknown command {cmd!r}")


def _pde_config(arg: str) -> dict:
    if arg in recipe_names() and not Path(arg).exists():
        return resolve(load_recipe(arg), PDE_SCHEMA)
    return _load_config(arg, PDE_SCHEMA)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pikernel", description="Physics-informed kernel learning and weak kernel learners.")
    ap.add_argument("--version", action="version", version=f"pikernel {__version__}")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (env PIKERNEL_THREADS; default: all cores)")
    ap.add_argument("--out", default=None, help="output directory (env PIKERNEL_OUTPUT_DIR; default: current directory)")
    ap.add_argument("--backend", choices=("numba", "numpy"), default=None, help="kernel backend")
    sp = ap.add_subparsers(dest="command", required=True)

    p = sp.add_parser("fit", help="fit a PIKL model from a CSV")
    p.add_argument("config")
    p = sp.add_parser("predict", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--x", nargs="+", default=None, help="input columns (default: those used for fitting)")
    p.add_argument("--output", default="predictions.csv")
    p = sp.add_parser("pde-solve", help="solve a PDE from boundary data (config file or recipe name)")
    p.add_argument("config")
    p = sp.add_parser("effdim", help="effective-dimension curve")
    p.add_argument("config")
    p = sp.add_parser("weakl", help="weak kernel learners")
    p.add_argument("subcommand", choices=sorted(WEAKL_SCHEMAS))
    p.add_argument("config")
    p = sp.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("kind", choices=GEN_KINDS)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--beta", type=float, default=20.0)
    p = sp.add_parser("bench", help="run the acceptance suite")
    p.add_argument("--criteria", default=None, help="comma-separated criterion numbers (default: all)")
    p.add_argument("--quick", action="store_true", help="reduced settings")
    p = sp.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest")
    sp.add_parser("recipes", help="list shipped recipes")
    return ap


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("PIKERNEL_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"PIKERNEL_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _set_threads(n: int):
    from threadpoolctl import threadpool_limits

    if n < 1:
        raise ConfigError("--threads must be at least 1")
    if _accel.HAS_NUMBA:
        import numba

        with warnings.catch_warnings():
            # the threading layer reports unsupported optional backends at first use
            warnings.simplefilter("ignore")
            numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return threadpool_limits(limits=n)


def _dispatch(args, outdir: Path):
    Run.started = time.perf_counter()
    c = args.command
    if c == "fit":
        return cmd_fit(_load_config(args.config, FIT_SCHEMA), outdir)
    if c == "predict":
        out = Path(args.output)
        if not out.is_absolute():
            out = outdir / out
        outdir.mkdir(parents=True, exist_ok=True)
        cmd_predict(args.model, args.data, out, args.x)
        return None
    if c == "pde-solve":
        return cmd_pde_solve(_pde_config(args.config), outdir)
    if c == "effdim":
        return cmd_effdim(_load_config(args.config, EFFDIM_SCHEMA), outdir)
    if c == "weakl":
        return cmd_weakl(args.subcommand, _load_config(args.config, WEAKL_SCHEMAS[args.subcommand]), outdir)
    if c == "gen":
        return cmd_gen(args.kind, args.n, args.seed, outdir, args.sigma, args.beta)
    if c == "bench":
        ids = None
        if args.criteria:
            try:
                ids = [int(v) for v in args.criteria.split(",")]
            except ValueError:
                raise ConfigError("--criteria takes comma-separated integers") from None
            from .acceptance import CRITERIA

            bad = [i for i in ids if i not in CRITERIA]
            if bad:
                raise ConfigError(f"unknown criteria: {bad}")
        return cmd_bench(outdir, ids, args.quick)
    if c == "rerun":
        try:
            manifest = json.loads(Path(args.manifest).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read manifest: {exc}") from None
        return _replay(manifest, outdir)
    if c == "recipes":
        print("\n".join(recipe_names()))
        return None
    raise ConfigError(f"unknown command {c}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.backend:
            _accel.set_backend(args.backend)
        outdir = Path(args.out or os.environ.get("PIKERNEL_OUTPUT_DIR") or ".")
        with _set_threads(_threads(args.threads)):
            man = _dispatch(args, outdir)
        if man is not None:
            print(f"wrote {len(man['outputs'])} output(s) to {outdir} in {man['wall_time']:.2f} s")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AcceptanceFailure as exc:
        print(f"acceptance failure: {exc}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining validation errors from the library are input problems
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
