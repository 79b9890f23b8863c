"""Physical domains and their normalized characteristic functions.

For a domain ``Omega`` inside the torus of a grid, the characteristic function
is ``F(k) = (1/vol) * integral_Omega exp(i*phase*omega_k . x) dx``. Every node
below implements the unnormalized transform ``ft(omega)`` of its indicator at
real angular frequencies, which makes scaling and translation exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .freqgrid import FrequencyGrid, difference_lattice, toeplitz_from_lattice

__all__ = [
    "Domain",
    "Cube",
    "Ball2D",
    "Scale",
    "Translate",
    "DisjointUnion",
    "Product",
    "Numeric",
    "char_fn",
    "char_values",
    "char_matrix",
    "mc_char_fn",
    "domain_from_dict",
    "DomainError",
]


class DomainError(ValueError):
    pass


def _sinc(u):
    """``sin(u)/u`` with a Taylor branch near zero."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < 1e-4
    us = u[small]
    out[small] = 1.0 - us * us / 6.0 + us**4 / 120.0
    ul = u[~small]
    out[~small] = np.sin(ul) / ul
    return out


def _jinc(u):
    """``2*J1(u)/u``, equal to 1 at the origin."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < 1e-4
    us = u[small]
    out[small] = 1.0 - us * us / 8.0 + us**4 / 192.0
    ul = u[~small]
    out[~small] = 2.0 * special.j1(ul) / ul
    return out


class Domain:
    dim: int

    def ft(self, omega: np.ndarray, B: np.ndarray) -> np.ndarray:
        """``integral_Omega exp(i omega.x) dx`` for each row of ``omega``."""
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def contains(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def measure(self) -> float:
        return float(self.ft(np.zeros((1, self.dim)), np.full(self.dim, np.inf)).real[0])

    def to_dict(self) -> dict:
        raise NotImplementedError

    def check_inside(self, B: Sequence[float], tol: float = 1e-12) -> None:
        lo, hi = self.bbox()
        B = np.asarray(B, dtype=float)
        if np.any(lo < -B - tol) or np.any(hi > B + tol):
            raise DomainError(
                f"domain bounding box [{lo.tolist()}, {hi.tolist()}] leaves the torus of half-widths {B.tolist()}"
            )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform points in the domain by rejection from the bounding box."""
        lo, hi = self.bbox()
        out = np.empty((0, self.dim))
        while out.shape[0] < n:
            X = rng.uniform(lo, hi, size=(max(2 * (n - out.shape[0]), 64), self.dim))
            out = np.vstack([out, X[self.contains(X)]])
        return out[:n]


@dataclass
class Cube(Domain):
    """Axis-aligned box ``prod [c_j - h_j, c_j + h_j]``."""

    half_widths: tuple
    center: tuple | None = None

    def __post_init__(self):
        self.half_widths = tuple(float(h) for h in np.atleast_1d(self.half_widths))
        if any(h <= 0 for h in self.half_widths):
            raise DomainError("cube half-widths must be positive")
        self.dim = len(self.half_widths)
        if self.center is None:
            self.center = (0.0,) * self.dim
        self.center = tuple(float(c) for c in np.atleast_1d(self.center))
        if len(self.center) != self.dim:
            raise DomainError("cube center has the wrong dimension")

    def ft(self, omega, B):
        h = np.asarray(self.half_widths)
        c = np.asarray(self.center)
        val = np.prod(2.0 * h * _sinc(omega * h), axis=1).astype(complex)
        if np.any(c != 0):
            val = val * np.exp(1j * omega @ c)
        return val

    def bbox(self):
        h, c = np.asarray(self.half_widths), np.asarray(self.center)
        return c - h, c + h

    def contains(self, X):
        X = np.asarray(X, dtype=float)
        h, c = np.asarray(self.half_widths), np.asarray(self.center)
        return np.all(np.abs(X - c) <= h, axis=1)

    def to_dict(self):
        out = {"type": "cube", "half_widths": list(self.half_widths)}
        if any(self.center):
            out["center"] = list(self.center)
        return out


@dataclass
class Ball2D(Domain):
    """Disk of the given radius centred at the origin."""

    radius: float

    def __post_init__(self):
        self.radius = float(self.radius)
        if self.radius <= 0:
            raise DomainError("radius must be positive")
        self.dim = 2

    def ft(self, omega, B):
        r = self.radius
        rho = np.sqrt(np.sum(omega**2, axis=1))
        return (np.pi * r * r * _jinc(r * rho)).astype(complex)

    def bbox(self):
        return np.full(2, -self.radius), np.full(2, self.radius)

    def contains(self, X):
        X = np.asarray(X, dtype=float)
        return np.sum(X**2, axis=1) <= self.radius**2

    def to_dict(self):
        return {"type": "ball", "radius": self.radius}


@dataclass
class Scale(Domain):
    """``a * Omega`` for a nonzero factor ``a`` with ``|a| <= 1``."""

    a: float
    child: Domain

    def __post_init__(self):
        self.a = float(self.a)
        if self.a == 0 or abs(self.a) > 1:
            raise DomainError("scale factor must lie in [-1, 1] without 0")
        self.dim = self.child.dim

    def ft(self, omega, B):
        return abs(self.a) ** self.dim * self.child.ft(self.a * omega, np.asarray(B) / abs(self.a))

    def bbox(self):
        lo, hi = self.child.bbox()
        a, b = self.a * lo, self.a * hi
        return np.minimum(a, b), np.maximum(a, b)

    def contains(self, X):
        return self.child.contains(np.asarray(X, dtype=float) / self.a)

    def to_dict(self):
        return {"type": "scale", "a": self.a, "child": self.child.to_dict()}


@dataclass
class Translate(Domain):
    """``Omega + z``."""

    z: tuple
    child: Domain

    def __post_init__(self):
        self.z = tuple(float(v) for v in np.atleast_1d(self.z))
        self.dim = self.child.dim
        if len(self.z) != self.dim:
            raise DomainError("translation vector has the wrong dimension")

    def ft(self, omega, B):
        return np.exp(1j * omega @ np.asarray(self.z)) * self.child.ft(omega, B)

    def bbox(self):
        lo, hi = self.child.bbox()
        z = np.asarray(self.z)
        return lo + z, hi + z

    def contains(self, X):
        return self.child.contains(np.asarray(X, dtype=float) - np.asarray(self.z))

    def to_dict(self):
        return {"type": "translate", "z": list(self.z), "child": self.child.to_dict()}


@dataclass
class DisjointUnion(Domain):
    children: list
    overlap_samples: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not self.children:
            raise DomainError("union needs at least one child")
        dims = {c.dim for c in self.children}
        if len(dims) != 1:
            raise DomainError("union children must share a dimension")
        self.dim = dims.pop()
        self._check_disjoint()

    def _check_disjoint(self):
        # probabilistic: count sample points claimed by two children
        lo, hi = self.bbox()
        rng = np.random.Generator(np.random.Philox(self.seed))
        X = rng.uniform(lo, hi, size=(self.overlap_samples, self.dim))
        hits = np.zeros(X.shape[0], dtype=int)
        for c in self.children:
            hits += c.contains(X)
        if np.any(hits > 1):
            raise DomainError("union children overlap")

    def ft(self, omega, B):
        return sum(c.ft(omega, B) for c in self.children)

    def bbox(self):
        boxes = [c.bbox() for c in self.children]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def contains(self, X):
        return np.any([c.contains(X) for c in self.children], axis=0)

    def to_dict(self):
        return {"type": "union", "children": [c.to_dict() for c in self.children]}


@dataclass
class Product(Domain):
    """Cartesian product; child ``i`` owns the next ``child.dim`` coordinates."""

    children: list

    def __post_init__(self):
        if not self.children:
            raise DomainError("product needs at least one child")
        self.dim = sum(c.dim for c in self.children)
        self._cuts = np.cumsum([0] + [c.dim for c in self.children])

    def _split(self, A):
        return [A[..., a:b] for a, b in zip(self._cuts[:-1], self._cuts[1:])]

    def ft(self, omega, B):
        B = np.broadcast_to(np.asarray(B, dtype=float), (self.dim,))
        out = np.ones(omega.shape[0], dtype=complex)
        for c, w, b in zip(self.children, self._split(omega), self._split(B)):
            out = out * c.ft(w, b)
        return out

    def bbox(self):
        boxes = [c.bbox() for c in self.children]
        return np.concatenate([b[0] for b in boxes]), np.concatenate([b[1] for b in boxes])

    def contains(self, X):
        X = np.asarray(X, dtype=float)
        return np.all([c.contains(x) for c, x in zip(self.children, self._split(X))], axis=0)

    def to_dict(self):
        return {"type": "product", "children": [c.to_dict() for c in self.children]}


@dataclass
class Numeric(Domain):
    """Domain given by a membership oracle; transforms are Monte Carlo estimates."""

    indicator: Callable[[np.ndarray], np.ndarray]
    dim: int
    samples: int = 100_000
    seed: int = 0
    box: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.samples < 1:
            raise DomainError("numeric domain needs at least one sample")

    def _draw(self, B):
        key = tuple(np.round(np.asarray(B, dtype=float), 14))
        if key not in self._cache:
            rng = np.random.Generator(np.random.Philox(self.seed))
            U = rng.uniform(-np.asarray(B), np.asarray(B), size=(self.samples, self.dim))
            inside = np.asarray(self.indicator(U), dtype=bool)
            self._cache[key] = U[inside]
        return self._cache[key]

    def ft_with_error(self, omega, B):
        B = np.broadcast_to(np.asarray(B, dtype=float), (self.dim,))
        vol = float(np.prod(2 * B))
        P = self._draw(B)
        vals = np.exp(1j * omega @ P.T) if P.size else np.zeros((omega.shape[0], 0), complex)
        # mean over all samples, points outside contribute zero
        mean = vals.sum(axis=1) / self.samples
        sq = (np.abs(vals) ** 2).sum(axis=1) / self.samples
        var = np.maximum(sq - np.abs(mean) ** 2, 0.0)
        return vol * mean, vol * np.sqrt(var / self.samples)

    def ft(self, omega, B):
        return self.ft_with_error(omega, B)[0]

    def bbox(self):
        if self.box is None:
            raise DomainError("numeric domain has no declared bounding box")
        return np.asarray(self.box[0], float), np.asarray(self.box[1], float)

    def contains(self, X):
        return np.asarray(self.indicator(np.asarray(X, dtype=float)), dtype=bool)

    def to_dict(self):
        raise DomainError("numeric domains wrap a Python callable and cannot be serialized")


def _omega(grid: FrequencyGrid, K) -> np.ndarray:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape[1] != grid.d:
        raise DomainError(f"multi-index has {K.shape[1]} entries, grid has d={grid.d}")
    return grid.phase * np.pi * K / np.asarray(grid.B)


def _check(domain: Domain, grid: FrequencyGrid) -> None:
    if domain.dim != grid.d:
        raise DomainError(f"domain dimension {domain.dim} does not match grid dimension {grid.d}")
    if not isinstance(domain, Numeric):
        domain.check_inside(grid.B)


def char_values(domain: Domain, grid: FrequencyGrid, K) -> np.ndarray:
    """Vectorized ``F_Omega`` at the rows of ``K``."""
    _check(domain, grid)
    return domain.ft(_omega(grid, K), np.asarray(grid.B)) / grid.vol


def char_fn(domain: Domain, grid: FrequencyGrid, k) -> complex:
    k = np.asarray(k).reshape(1, -1)
    if np.max(np.abs(k)) > 2 * grid.m:
        raise DomainError("multi-index outside the difference lattice")
    return complex(char_values(domain, grid, k)[0])


def mc_char_fn(domain: Numeric, grid: FrequencyGrid, k, samples: int | None = None, seed: int | None = None):
    """Monte Carlo estimate of ``F_Omega(k)`` with its standard error."""
    if samples is not None or seed is not None:
        domain = Numeric(
            domain.indicator,
            domain.dim,
            samples if samples is not None else domain.samples,
            seed if seed is not None else domain.seed,
            domain.box,
        )
    if domain.dim != grid.d:
        raise DomainError("dimension mismatch")
    val, err = domain.ft_with_error(_omega(grid, np.reshape(k, (1, -1))), np.asarray(grid.B))
    return complex(val[0]) / grid.vol, float(err[0]) / grid.vol


def char_matrix(domain: Domain, grid: FrequencyGrid) -> np.ndarray:
    """``C[a, b] = F_Omega(k_a - k_b)``, so that ``z^* C z = integral_Omega |f_z|^2``.

    Only the ``(4m+1)^d`` distinct differences are evaluated.
    """
    vals = char_values(domain, grid, difference_lattice(grid))
    return toeplitz_from_lattice(grid, vals)


def domain_from_dict(spec: dict) -> Domain:
    """Build a domain from its JSON/TOML tree."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise DomainError("domain node must be a table with a 'type' key")
    kind = spec["type"]
    allowed = {
        "cube": {"half_widths", "center"},
        "ball": {"radius"},
        "scale": {"a", "child"},
        "translate": {"z", "child"},
        "union": {"children"},
        "product": {"children"},
    }
    if kind not in allowed:
        raise DomainError(f"unknown domain type {kind!r}")
    extra = set(spec) - allowed[kind] - {"type"}
    if extra:
        raise DomainError(f"unknown keys for {kind}: {sorted(extra)}")
    try:
        if kind == "cube":
            return Cube(spec["half_widths"], spec.get("center"))
        if kind == "ball":
            return Ball2D(spec["radius"])
        if kind == "scale":
            return Scale(spec["a"], domain_from_dict(spec["child"]))
        if kind == "translate":
            return Translate(spec["z"], domain_from_dict(spec["child"]))
        if kind == "union":
            return DisjointUnion([domain_from_dict(c) for c in spec["children"]])
        return Product([domain_from_dict(c) for c in spec["children"]])
    except KeyError as exc:
        raise DomainError(f"{kind} domain is missing field {exc.args[0]!r}") from None


def domain_from_json(text: str) -> Domain:
    return domain_from_dict(json.loads(text))
