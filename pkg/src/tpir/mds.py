"""Reed-Solomon [N, T] codes over a prime field with erasure recovery."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from itertools import combinations
from typing import Iterable

import numpy as np

from .field import DimensionError, PrimeField, SingularMatrixError


class CodeParameterError(ValueError):
    pass


class DuplicatePositionError(ValueError):
    pass


class MdsInvariantError(RuntimeError):
    """A T-column submatrix of G turned out singular; G is not MDS."""


@dataclass(frozen=True)
class MdsCode:
    """An [N, T] Reed-Solomon code with Vandermonde generator.

    ``g[r, j] = eval_points[j] ** r`` for r < T (with 0**0 = 1).  Positions
    are 1-based in the public API.
    """

    n: int
    t: int
    field: PrimeField
    g: np.ndarray
    eval_points: tuple[int, ...]
    _decoders: dict = dc_field(default_factory=dict, compare=False, repr=False)

    def encode(self, msg) -> np.ndarray:
        """Return ``msg @ G``; accepts leading batch axes."""
        msg = self.field.array(msg)
        if msg.shape[-1] != self.t:
            raise DimensionError(f"message length {msg.shape[-1]} != T={self.t}")
        return self.field.matmul(msg, self.g)

    def _decoder(self, positions: tuple[int, ...]) -> np.ndarray:
        dec = self._decoders.get(positions)
        if dec is None:
            cols = [p - 1 for p in positions]
            try:
                dec = self.field.inverse(self.g[:, cols])
            except SingularMatrixError as exc:
                raise MdsInvariantError(f"columns {positions} of G are dependent") from exc
            self._decoders[positions] = dec
        return dec

    def recover(self, known: Iterable[tuple[int, int]]) -> np.ndarray:
        """The unique codeword through T known ``(position, value)`` pairs."""
        known = list(known)
        return self.recover_batch(tuple(int(p) for p, _ in known), [v for _, v in known])

    def recover_batch(self, positions: tuple[int, ...], values) -> np.ndarray:
        """Recover many codewords erased at the same places.

        ``values[..., i]`` is the symbol at ``positions[i]``; returns ``(..., N)``.
        """
        positions = tuple(int(p) for p in positions)
        if len(set(positions)) != len(positions):
            raise DuplicatePositionError(f"repeated positions in {positions}")
        if len(positions) != self.t:
            raise DimensionError(f"need exactly T={self.t} known coordinates, got {len(positions)}")
        if any(not 1 <= p <= self.n for p in positions):
            raise DimensionError(f"positions {positions} outside [1, {self.n}]")
        values = self.field.array(values)
        if values.shape[-1] != self.t:
            raise DimensionError(f"values of shape {values.shape} do not match {self.t} positions")
        return self.encode(self.field.matmul(values, self._decoder(positions)))

    def is_mds(self) -> bool:
        """Exhaustively check every T x T column submatrix (small N only)."""
        return all(
            self.field.is_invertible(self.g[:, list(cols)])
            for cols in combinations(range(self.n), self.t)
        )


def make_mds(n: int, t: int, field: PrimeField) -> MdsCode:
    if t < 1 or t >= n:
        raise CodeParameterError(f"need 1 <= T < N, got N={n}, T={t}")
    if field.q < n:
        raise CodeParameterError(f"an [N={n}, T={t}] RS code needs q >= N, got q={field.q}")
    points = tuple(range(n))
    g = np.array([[pow(x, r, field.q) for x in points] for r in range(t)], dtype=np.int64)
    return MdsCode(n, t, field, g, points)
