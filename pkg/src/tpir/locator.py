"""Binary locator matrices: which entries of a typed row block go to pure
interference sums (1) and which to mixed sums (0)."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .params import ConsistencyError, SchemeParams


class LocatorError(ValueError):
    pass


def make_E(u: int, v: int, m: int, n_cols: int) -> np.ndarray:
    """``m x n_cols`` 0/1 matrix with row weight u and column weight v.

    Row k is ``1^u 0^(n_cols-u)`` cyclically shifted right by ``u*k``.
    """
    if m < 0 or n_cols < 0 or not 0 <= u <= n_cols or not 0 <= v <= m:
        raise LocatorError(f"E({u},{v}) of shape {m}x{n_cols}: weights out of range")
    if m * u != n_cols * v:
        raise LocatorError(f"E({u},{v}) of shape {m}x{n_cols}: m*u != n*v")
    out = np.zeros((m, n_cols), dtype=np.uint8)
    for k in range(m):
        cols = (np.arange(u) + u * k) % n_cols if n_cols else []
        out[k, cols] = 1
    if m and (np.any(out.sum(axis=1) != u) or np.any(out.sum(axis=0) != v)):
        raise LocatorError(f"cyclic construction of E({u},{v}) {m}x{n_cols} missed the column weight")
    return out


@dataclass(frozen=True)
class LocatorMatrix:
    size_class: int
    bits: np.ndarray

    def ones(self, row: int) -> tuple[int, ...]:
        """1-based servers holding interference sums for local row ``row`` (1-based)."""
        return tuple(int(j) + 1 for j in np.flatnonzero(self.bits[row - 1]))


def _whole(x: Fraction, what: str) -> int:
    if x.denominator != 1:
        raise ConsistencyError(f"{what} = {x} is not an integer")
    return int(x)


def make_locator(i: int, p: SchemeParams) -> LocatorMatrix:
    """The locator matrix for interference types of cardinality ``i``."""
    if not 1 <= i <= p.M - 1:
        raise LocatorError(f"size class {i} outside [1, {p.M - 1}]")
    N, T = p.N, p.T
    a, b = p.a(i), p.b(i)
    if N >= 2 * T:
        top_rows = _whole(Fraction((N - T) * b, T), "(N-T)*beta/T")
        top = np.hstack([np.zeros((top_rows, T), np.uint8), make_E(T, b, top_rows, N - T)])
        bottom = np.hstack([make_E(T, a, a, T), np.zeros((a, N - T), np.uint8)])
    else:
        shared = _whole(Fraction((2 * T - N) * b, T), "(2T-N)*beta/T")
        top = np.hstack([make_E(2 * T - N, shared, b, T), make_E(N - T, b, b, N - T)])
        rest = a - shared
        if rest < 0:
            raise ConsistencyError(f"alpha_{i} - (2T-N)beta_{i}/T = {rest} < 0")
        bottom = np.hstack([make_E(T, rest, rest, T), np.zeros((rest, N - T), np.uint8)])
    bits = np.vstack([top, bottom])
    problems = locator_violations(bits, i, p)
    if problems:
        raise ConsistencyError("; ".join(problems))
    return LocatorMatrix(i, bits)


def locator_violations(bits: np.ndarray, i: int, p: SchemeParams) -> list[str]:
    """Named weight constraints the matrix breaks (empty when valid)."""
    out = []
    if bits.shape != (p.rows_per_type(i), p.N):
        return [f"M_{i} has shape {bits.shape}, expected ({p.rows_per_type(i)}, {p.N})"]
    if np.any((bits != 0) & (bits != 1)):
        out.append(f"M_{i} is not binary")
    for r, w in enumerate(bits.sum(axis=1)):
        if w != p.T:
            out.append(f"M_{i} row {r + 1} weight {w} != T={p.T}")
    for j, w in enumerate(bits.sum(axis=0)):
        want = p.a(i) if j < p.T else p.b(i)
        name = "alpha" if j < p.T else "beta"
        if w != want:
            out.append(f"M_{i} column {j + 1} weight {w} != {name}_{i}={want}")
    return out
