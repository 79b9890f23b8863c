"""Constant-coefficient linear differential operators and their Fourier symbols.

Operators are sums ``sum_alpha a_alpha d^alpha``. The textual form accepted by
:func:`parse_operator` is a signed sum of terms such as ``"dt^2 - 4*dx^2"`` or
``"d1^2 + d1 + 1"``: each term is an optional numeric coefficient followed by
derivative factors ``<axis>^<power>``. Axes are ``d1 .. dd`` by default, or the
names passed in ``axes`` (``dt``, ``dx`` ...). ``"0"`` is the zero operator.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .freqgrid import FrequencyGrid

__all__ = ["LinearOperator", "parse_operator", "symbol", "symbol_values", "OperatorError"]


class OperatorError(ValueError):
    pass


@dataclass(frozen=True)
class LinearOperator:
    d: int
    terms: tuple  # sorted tuple of (alpha, coefficient)

    def __init__(self, d: int, terms=None):
        items = {}
        for alpha, coef in (dict(terms or {})).items():
            alpha = tuple(int(a) for a in np.atleast_1d(alpha))
            if len(alpha) != d or any(a < 0 for a in alpha):
                raise OperatorError(f"multi-index {alpha} invalid for d={d}")
            if not np.isscalar(coef) or np.iscomplexobj(coef):
                raise OperatorError("coefficients must be real constants")
            coef = float(coef)
            if coef != 0.0:
                items[alpha] = items.get(alpha, 0.0) + coef
        items = {a: c for a, c in items.items() if c != 0.0}
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "terms", tuple(sorted(items.items(), reverse=True)))

    @property
    def coefficients(self) -> dict:
        return dict(self.terms)

    @property
    def order(self) -> int:
        return max((sum(a) for a, _ in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "LinearOperator") -> "LinearOperator":
        if other.d != self.d:
            raise OperatorError("dimension mismatch")
        out = self.coefficients
        for a, c in other.terms:
            out[a] = out.get(a, 0.0) + c
        return LinearOperator(self.d, out)

    def __rmul__(self, scalar: float) -> "LinearOperator":
        return LinearOperator(self.d, {a: scalar * c for a, c in self.terms})

    def to_string(self, axes=None) -> str:
        axes = _axis_names(self.d, axes)
        if self.is_zero:
            return "0"
        parts = []
        for alpha, coef in self.terms:
            factors = [
                axes[j] if p == 1 else f"{axes[j]}^{p}" for j, p in enumerate(alpha) if p > 0
            ]
            mag = abs(coef)
            mag_s = str(int(mag)) if mag.is_integer() and mag < 1e15 else repr(mag)
            sign = "-" if coef < 0 else "+"
            if not factors:
                body = mag_s
            elif mag == 1.0:
                body = " ".join(factors)
            else:
                body = f"{mag_s}*" + " ".join(factors)
            parts.append((sign, body))
        text = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __str__(self) -> str:
        return self.to_string()

    def to_dict(self, axes=None) -> dict:
        return {"d": self.d, "text": self.to_string(axes), "axes": list(_axis_names(self.d, axes))}


def _axis_names(d: int, axes) -> tuple:
    if axes is None:
        return tuple(f"d{j + 1}" for j in range(d))
    axes = tuple(axes)
    if len(axes) != d:
        raise OperatorError(f"expected {d} axis names, got {len(axes)}")
    return axes


_NUM = r"(?:\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"


def _tokens(text: str):
    pat = re.compile(rf"\s*(?:(?P<num>{_NUM})|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*^]))")
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = pat.match(text, pos)
        if not m or m.end() == pos:
            raise OperatorError(f"unexpected character {text[pos:].strip()[:1]!r} in {text!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


def parse_operator(text: str, d: int, axes=None) -> LinearOperator:
    """Parse the operator mini-grammar described in the module docstring."""
    names = _axis_names(d, axes)
    if not isinstance(text, str) or not text.strip():
        raise OperatorError("empty operator expression")
    toks = _tokens(text.replace("**", "^"))
    coeffs: dict = {}
    i = 0
    first = True
    while i < len(toks):
        sign = 1.0
        if toks[i][0] == "op" and toks[i][1] in "+-":
            sign = -1.0 if toks[i][1] == "-" else 1.0
            i += 1
        elif not first:
            raise OperatorError(f"expected '+' or '-' before {toks[i][1]!r} in {text!r}")
        first = False
        coef, alpha, seen = 1.0, [0] * d, False
        if i < len(toks) and toks[i][0] == "num":
            coef = float(toks[i][1])
            i += 1
            seen = True
            if i < len(toks) and toks[i] == ("op", "*"):
                i += 1
        while i < len(toks) and toks[i][0] == "name":
            name = toks[i][1]
            if name not in names:
                raise OperatorError(f"unknown axis {name!r} (known: {', '.join(names)})")
            i += 1
            power = 1
            if i < len(toks) and toks[i] == ("op", "^"):
                i += 1
                if i >= len(toks) or toks[i][0] != "num" or not re.fullmatch(r"\d+", toks[i][1]):
                    got = toks[i][1] if i < len(toks) else "end of input"
                    raise OperatorError(f"exponent {got!r} is not a non-negative integer")
                power = int(toks[i][1])
                i += 1
            alpha[names.index(name)] += power
            seen = True
            if i < len(toks) and toks[i] == ("op", "*"):
                i += 1
        if not seen:
            raise OperatorError(f"empty term in {text!r}")
        key = tuple(alpha)
        coeffs[key] = coeffs.get(key, 0.0) + sign * coef
    return LinearOperator(d, coeffs)


def operator_from_spec(spec, d: int, axes=None) -> LinearOperator:
    """Accept either mini-grammar text or a coefficient map ``{"d1^2": 1.0}``."""
    if isinstance(spec, str):
        return parse_operator(spec, d, axes)
    if isinstance(spec, dict) and "text" in spec:
        if int(spec.get("d", d)) != d:
            raise OperatorError(f"serialized operator has d={spec['d']}, expected {d}")
        return parse_operator(spec["text"], d, spec.get("axes", axes))
    if isinstance(spec, dict):
        op = LinearOperator(d, {})
        for term, coef in spec.items():
            op = op + float(coef) * parse_operator(term, d, axes)
        return op
    raise OperatorError("operator must be a string or a coefficient table")


def symbol_values(op: LinearOperator, grid: FrequencyGrid, K=None) -> np.ndarray:
    """``P(k) = sum_alpha a_alpha prod_j (i*phase*pi*k_j/B_j)^alpha_j`` for each row of K.

    ``P(k)`` multiplies the feature ``phi_k``; the represented function uses
    ``conj(phi_k)``, whose multiplier is ``conj(P(k))``.
    """
    if op.d != grid.d:
        raise OperatorError(f"operator dimension {op.d} does not match grid dimension {grid.d}")
    K = grid.enumerate() if K is None else np.atleast_2d(np.asarray(K, dtype=float))
    w = 1j * grid.phase * np.pi * K / np.asarray(grid.B)
    out = np.zeros(K.shape[0], dtype=complex)
    for alpha, coef in op.terms:
        out += coef * np.prod(w ** np.asarray(alpha), axis=1)
    return out


def symbol(op: LinearOperator, grid: FrequencyGrid, k) -> complex:
    return complex(symbol_values(op, grid, np.reshape(k, (1, -1)))[0])


def apply_to_coefficients(op: LinearOperator, grid: FrequencyGrid, z) -> np.ndarray:
    """Coefficients of ``D f_z`` in the same representation."""
    return np.conj(symbol_values(op, grid)) * np.asarray(z)
