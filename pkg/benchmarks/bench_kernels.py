"""Numba against pure-numpy timings for the hot kernels.

Usage: python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each kernel runs once per backend to warm up (numba compiles on first call),
then ``repeat`` times; the best time is reported together with the largest
difference between the two backends' outputs.
"""
import argparse
import json
import time

import numpy as np

from pikernel import _accel, schemes
from pikernel.datagen import rng_for
from pikernel.evaluation import BootstrapConfig, resample_means
from pikernel.freqgrid import FrequencyGrid, lattice_sums, toeplitz_from_lattice


def _cases():
    rng = rng_for(0)
    g2 = FrequencyGrid(2, 20, (1.0, 1.0))
    X2 = rng.uniform(-0.5, 0.5, (20000, 2))
    S = lattice_sums(g2, X2, 2 * g2.m)
    g4 = FrequencyGrid(4, 3, (1.0,) * 4)
    X4 = rng.uniform(-0.5, 0.5, (20000, 4))
    wave = schemes.WaveGrid(*schemes.split_budget(10000), 0.0, 0)
    Z = rng.standard_normal((5000, 2)).cumsum(axis=0)
    return {
        "lattice_sums d=2 m=20 n=2e4": lambda: lattice_sums(g2, X2, 2 * g2.m),
        "lattice_sums d=4 m=3 n=2e4": lambda: lattice_sums(g4, X4, 2 * g4.m),
        "toeplitz d=2 m=20": lambda: toeplitz_from_lattice(g2, S),
        "euler wave n=1e4": lambda: np.array([schemes.euler_wave(wave).l2_relative_error]),
        "rk4 wave n=1e4": lambda: np.array([schemes.rk4_wave(wave).l2_relative_error]),
        "cn wave n=1e4": lambda: np.array([schemes.cn_wave(wave).l2_relative_error]),
        "moving-block means 2000 reps": lambda: resample_means(Z, BootstrapConfig(block=20, replicates=2000)),
        "stationary means 2000 reps": lambda: resample_means(Z, BootstrapConfig(block=20, replicates=2000, mode="stationary")),
    }


def _time(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(out)


def run(repeat=3):
    rows = []
    for name, fn in _cases().items():
        res = {}
        for be in ("numba", "numpy"):
            _accel.set_backend(be)
            res[be] = _time(fn, repeat)
        _accel.set_backend("numba")
        a, b = res["numba"][1], res["numpy"][1]
        diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1.0))
        rows.append({"kernel": name, "numba_s": res["numba"][0], "numpy_s": res["numpy"][0],
                     "speedup": res["numpy"][0] / res["numba"][0], "max_rel_diff": diff})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        print("numba is not installed; only the numpy backend can run")
        return
    rows = run(args.repeat)
    print(f"{'kernel':<32s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} {'rel diff':>10s}")
    for r in rows:
        print(f"{r['kernel']:<32s} {r['numba_s']:10.4f} {r['numpy_s']:10.4f} {r['speedup']:8.2f} {r['max_rel_diff']:10.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
