"""Exact arithmetic over a prime field F_q and dense matrices over it.

Matrices are plain ``numpy`` int64 arrays holding canonical representatives
in ``[0, q)``.  Products and eliminations run on float BLAS kernels while
every partial sum stays exactly representable (float32 for tiny moduli,
float64 otherwise); larger moduli fall back to Python integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sympy import isprime

from . import _kernels as _k

__all__ = [
    "FieldError",
    "ZeroInverseError",
    "SingularMatrixError",
    "DimensionError",
    "PrimeField",
    "mat_from_vec",
    "interference_coefficients",
    "interference_rows",
    "mix_interference",
]

_EXACT = 2**53
_BLOCK = 64
_LEAF = 8
_TRSM_LEAF = 16


class FieldError(ValueError):
    """Base class for field and matrix errors."""


class ZeroInverseError(FieldError, ZeroDivisionError):
    pass


class SingularMatrixError(FieldError):
    """Raised when elimination finds no pivot.

    ``column`` is the 0-based column index where no nonzero pivot was found.
    """

    def __init__(self, column: int):
        super().__init__(f"matrix is singular: no pivot in column {column}")
        self.column = column


class DimensionError(FieldError):
    pass


def _work_dtype(q: int):
    # block-sized dot products must stay exact in the working type
    if (_BLOCK + 1) * (q - 1) ** 2 < 2**24:
        return np.float32
    return np.float64 if (_BLOCK + 1) * (q - 1) ** 2 < _EXACT else object


def _fmod(x: np.ndarray, q: int) -> np.ndarray:
    """In-place reduction of an exact-integer float array."""
    x = np.ascontiguousarray(x)
    _k.reduce_flat(x.reshape(-1), q)
    return x


def _mm(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """``a @ b mod q`` for operands already reduced mod q (float64 or object)."""
    if a.dtype == object or b.dtype == object:
        return np.matmul(a.astype(object), b.astype(object)) % q
    inner = a.shape[-1]
    step = max(1, (_EXACT - 1) // max(1, (q - 1) ** 2))
    if inner <= step:
        return _fmod(np.matmul(a, b), q)
    out = None
    for k0 in range(0, inner, step):
        rows = b[k0 : k0 + step] if b.ndim == 1 else b[..., k0 : k0 + step, :]
        part = _fmod(np.matmul(a[..., k0 : k0 + step], rows), q)
        out = part if out is None else _fmod(out + part, q)
    return out


@dataclass(frozen=True)
class PrimeField:
    """The prime field F_q.

    Scalars are Python ints, matrices are int64 arrays with entries in [0, q).
    """

    q: int

    def __post_init__(self):
        if not isinstance(self.q, (int, np.integer)) or self.q < 2 or not isprime(int(self.q)):
            raise FieldError(f"field modulus must be a prime >= 2, got {self.q!r}")
        object.__setattr__(self, "q", int(self.q))

    # -- scalars -----------------------------------------------------------

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def inv(self, a: int) -> int:
        a = int(a) % self.q
        if a == 0:
            raise ZeroInverseError("0 has no multiplicative inverse")
        return pow(a, -1, self.q)

    def arith(self, a: int, b: int, op: str) -> int:
        ops = {"add": self.add, "sub": self.sub, "mul": self.mul}
        if op not in ops:
            raise FieldError(f"unknown operation {op!r}")
        return ops[op](a, b)

    # -- arrays ------------------------------------------------------------

    def array(self, values) -> np.ndarray:
        """Reduce an integer array-like into canonical int64 form."""
        arr = np.asarray(values)
        if arr.dtype == object:
            return (arr % self.q).astype(np.int64)
        arr = arr.astype(np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.q):
            arr = np.mod(arr, self.q)
        return arr

    def identity(self, n: int) -> np.ndarray:
        return np.eye(n, dtype=np.int64)

    def matmul(self, a, b) -> np.ndarray:
        """Exact product over F_q; accepts vectors (1-D) on either side."""
        a = np.asarray(a)
        b = np.asarray(b)
        if a.shape[-1] != b.shape[0 if b.ndim == 1 else -2]:
            raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
        if a.size == 0 or b.size == 0:
            return np.matmul(a.astype(np.int64), b.astype(np.int64))
        if (b.ndim == 1 or a.shape[-1] <= 16) and a.shape[-1] * (self.q - 1) ** 2 < 2**63:
            # matrix-vector or short inner dimension: one exact int64 pass
            return (a.astype(np.int64, copy=False) @ b.astype(np.int64, copy=False)) % self.q
        if self.q < 2**26:
            return _mm(a.astype(np.float64), b.astype(np.float64), self.q).astype(np.int64)
        return _mm(a.astype(object) % self.q, b.astype(object) % self.q, self.q).astype(np.int64)

    def rank(self, a) -> int:
        """Rank by row echelon reduction (small matrices)."""
        m = np.array(self.array(a).tolist(), dtype=object).reshape(np.shape(a))
        rows, cols = m.shape
        r = 0
        for c in range(cols):
            if r == rows:
                break
            nz = np.flatnonzero(m[r:, c] != 0)
            if nz.size == 0:
                continue
            p = r + nz[0]
            if p != r:
                m[[r, p]] = m[[p, r]]
            m[r] = (m[r] * pow(int(m[r, c]), -1, self.q)) % self.q
            below = m[r + 1 :, c].copy()
            m[r + 1 :] = (m[r + 1 :] - np.outer(below, m[r])) % self.q
            r += 1
        return r

    def lu(self, a) -> "LUFactors":
        """PLU factorisation ``A[perm] = L U`` with first-nonzero pivoting.

        Raises SingularMatrixError carrying the column with no pivot.
        """
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        if _work_dtype(self.q) is object:
            return _lu_object(self, a)
        m = self._work_copy(a)
        perm = np.arange(m.shape[0])
        _factor(m, perm, self.q, 0, m.shape[1])
        return LUFactors(self, perm, m)

    def has_full_column_rank(self, a) -> bool:
        """True iff the columns of a tall matrix are linearly independent."""
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] < a.shape[1]:
            raise DimensionError(f"expected a tall matrix, got shape {a.shape}")
        return self._full_rank(a)

    def has_full_row_rank(self, a) -> bool:
        """True iff the rows of a wide matrix are linearly independent."""
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] > a.shape[1]:
            raise DimensionError(f"expected a wide matrix, got shape {a.shape}")
        return self._full_rank(a.T)

    def _work_copy(self, a: np.ndarray) -> np.ndarray:
        if a.dtype == object or a.size and (a.min() < 0 or a.max() >= self.q):
            a = self.array(a)
        return np.ascontiguousarray(a, dtype=_work_dtype(self.q))

    def _full_rank(self, tall: np.ndarray) -> bool:
        if _work_dtype(self.q) is object:
            return self.rank(tall) == tall.shape[1]
        m = self._work_copy(tall)
        try:
            _factor(m, np.arange(m.shape[0]), self.q, 0, m.shape[1])
        except SingularMatrixError:
            return False
        return True

    def is_invertible(self, a) -> bool:
        try:
            self.lu(a)
        except SingularMatrixError:
            return False
        return True

    def solve(self, a, b) -> np.ndarray:
        """Solve ``A X = B`` for square nonsingular A (B may be a vector)."""
        return self.lu(a).solve(b)

    def inverse(self, a) -> np.ndarray:
        """Inverse by Gaussian elimination; raises SingularMatrixError."""
        return self.lu(a).inverse()

    # -- randomness --------------------------------------------------------

    def random_matrix(self, shape, rng: np.random.Generator) -> np.ndarray:
        """Independent uniform entries."""
        small = np.uint8 if self.q <= 1 << 8 else np.uint16 if self.q <= 1 << 16 else np.int64
        if small is np.int64:
            return rng.integers(0, self.q, size=shape, dtype=np.int64)
        return rng.integers(0, self.q, size=shape, dtype=small).astype(np.int64)

    def random_invertible(self, dim: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform sample from GL(dim, q)."""
        return self.random_invertible_lu(dim, rng)[0]

    def random_invertible_lu(self, dim: int, rng: np.random.Generator) -> tuple[np.ndarray, "LUFactors"]:
        """Uniform sample from GL(dim, q) together with its factorisation.

        Columns are drawn uniformly and a column that falls into the span of
        the earlier ones is redrawn on its own, which is the sequential
        description of the uniform law on GL(dim, q).
        """
        if dim < 1:
            raise DimensionError("dimension must be >= 1")
        a = self.random_matrix((dim, dim), rng)
        if _work_dtype(self.q) is object:
            while True:
                try:
                    return a, _lu_object(self, a)
                except SingularMatrixError:
                    a = self.random_matrix((dim, dim), rng)
        # fresh samples are reduced already
        m = np.ascontiguousarray(a, dtype=_work_dtype(self.q))
        perm = np.arange(dim)
        _factor(m, perm, self.q, 0, dim, redraw=self._redraw(a, m, perm, rng))
        return a, LUFactors(self, perm, m)

    def random_full_row_rank(self, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform ``rows x cols`` matrix (rows <= cols) of full row rank.

        Same law as the first ``rows`` rows of a uniform invertible matrix.
        """
        if rows > cols:
            raise DimensionError(f"cannot have full row rank with shape {rows}x{cols}")
        h = self.random_matrix((rows, cols), rng)
        if _work_dtype(self.q) is object:
            while self.rank(h) < rows:
                h = self.random_matrix((rows, cols), rng)
            return h
        m = np.ascontiguousarray(h.T, dtype=_work_dtype(self.q))
        perm = np.arange(cols)
        view = h.T  # redrawing a column of h.T rewrites a row of h
        _factor(m, perm, self.q, 0, rows, redraw=self._redraw(view, m, perm, rng))
        return h

    def _redraw(self, orig: np.ndarray, m: np.ndarray, perm: np.ndarray, rng: np.random.Generator):
        q = self.q
        lim = _accumulation_limit(q)

        def redraw(c: int) -> None:
            x = self.random_matrix(orig.shape[0], rng)
            orig[:, c] = x
            y = x[perm].astype(np.float64)
            _k.column_transform(m, y, c, q, lim)
            m[:, c] = y

        return redraw

    def nonsingular_mask(self, stack: np.ndarray) -> np.ndarray:
        """Vectorised invertibility test for a stack of small square matrices."""
        q = self.q
        a = np.array(stack, dtype=np.int64) % q
        count, n, _ = a.shape
        inv_table = _inverse_table(q)
        ok = np.ones(count, dtype=bool)
        idx = np.arange(count)
        for c in range(n):
            nz = a[:, c:, c] != 0
            ok &= nz.any(axis=1)
            piv = c + nz.argmax(axis=1)
            top = a[idx, c].copy()
            a[idx, c] = a[idx, piv]
            a[idx, piv] = top
            pv = a[idx, c, c]
            pinv = inv_table[pv] if inv_table is not None else np.array([pow(int(x), -1, q) if x else 0 for x in pv])
            factors = (a[:, c + 1 :, c] * pinv[:, None]) % q
            a[:, c + 1 :, :] = (a[:, c + 1 :, :] - factors[:, :, None] * a[:, c, None, :]) % q
        return ok

    def random_invertible_batch(self, count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
        """``count`` independent uniform samples from GL(dim, q), shape (count, dim, dim)."""
        out = np.empty((count, dim, dim), dtype=np.int64)
        filled = 0
        while filled < count:
            need = count - filled
            draw = self.random_matrix((need + need // 2 + 8, dim, dim), rng)
            good = draw[self.nonsingular_mask(draw)][:need]
            out[filled : filled + len(good)] = good
            filled += len(good)
        return out


def _gemm_sub(dst: np.ndarray, a: np.ndarray, b: np.ndarray, q: int, lazy: bool) -> None:
    """dst <- dst - a @ b for reduced a, b; reduced mod q unless ``lazy``."""
    if lazy:
        dst -= a @ b
        return
    step = _accumulation_limit(q, dst.dtype)
    for k0 in range(0, a.shape[1], step):
        dst -= a[:, k0 : k0 + step] @ b[k0 : k0 + step]
        _k.reduce_(dst, q)


def _trsm(m: np.ndarray, k0: int, k1: int, c0: int, c1: int, q: int, lazy: bool) -> None:
    # m[k0:k1, c0:c1] <- L[k0:k1, k0:k1]^-1 m[k0:k1, c0:c1]
    if k1 - k0 <= _TRSM_LEAF:
        lim = m.shape[0] if lazy else _accumulation_limit(q, m.dtype)
        _k.trsm_rows(m, k0, k1, c0, c1, q, lim)
        return
    h = (k0 + k1) // 2
    _trsm(m, k0, h, c0, c1, q, lazy)
    _gemm_sub(m[h:k1, c0:c1], m[h:k1, k0:h], m[k0:h, c0:c1], q, lazy)
    _trsm(m, h, k1, c0, c1, q, lazy)


def _factor(m: np.ndarray, perm: np.ndarray, q: int, c0: int, c1: int, lazy: Optional[bool] = None, redraw=None) -> None:
    """Recursive PLU on columns [c0, c1) of a tall float matrix, in place.

    Active entries must be reduced on entry; all products of the recursion
    go through BLAS with exact partial sums.  An entry absorbs at most one
    product per eliminated column, so when ``cols * (q-1)**2`` fits the
    mantissa the trailing updates skip reduction (``lazy``); pivot search
    and triangular solves reduce what they read.

    ``redraw(c)``, when given, replaces a dependent column c in place and
    elimination resumes at c instead of failing.
    """
    if lazy is None:
        exact = 2**24 if m.dtype == np.float32 else _EXACT
        lazy = m.shape[1] * (q - 1) ** 2 + q < exact
    if c1 - c0 <= _LEAF:
        start = c0
        while True:
            bad = _k.panel_factor(m, perm, start, c1, q)
            if bad < 0:
                return
            if redraw is None:
                raise SingularMatrixError(int(bad))
            redraw(int(bad))
            start = int(bad)
    mid = (c0 + c1) // 2
    _factor(m, perm, q, c0, mid, lazy, redraw)
    _trsm(m, c0, mid, mid, c1, q, lazy)
    _gemm_sub(m[mid:, mid:c1], m[mid:, c0:mid], m[c0:mid, mid:c1], q, lazy)
    _factor(m, perm, q, mid, c1, lazy, redraw)


def _accumulation_limit(q: int, dtype=np.float64) -> int:
    """How many products of reduced operands a reduced value can absorb exactly."""
    exact = 2**24 if dtype == np.float32 else _EXACT
    return max(1, (exact - q) // max(1, (q - 1) ** 2))


class LUFactors:
    """A factorisation ``A[perm] = L U`` over F_q, reusable for solves."""

    def __init__(self, field: PrimeField, perm: np.ndarray, lu: np.ndarray):
        self.field = field
        self.perm = perm
        self.lu = lu

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    def solve(self, b) -> np.ndarray:
        """X with ``A X = B``."""
        f = self.field
        b = f.array(b)
        vector = b.ndim == 1
        if b.shape[0] != self.n:
            raise DimensionError(f"right-hand side has {b.shape[0]} rows, expected {self.n}")
        rhs = b.reshape(self.n, -1)[self.perm]
        if self.lu.dtype == object:
            x = _solve_object(f, self.lu, rhs.astype(object))
        else:
            x = np.ascontiguousarray(rhs, dtype=np.float64)
            lim = _accumulation_limit(f.q)
            if vector:
                _k.solve_vector(self.lu, x[:, 0], f.q, lim)
            else:
                _k.solve_lower_unit(self.lu, x, f.q, lim)
                _k.solve_upper(self.lu, x, f.q, lim)
        x = x.astype(np.int64)
        return x[:, 0] if vector else x

    def solve_left(self, x) -> np.ndarray:
        """Row vector w with ``w A = x`` in O(n^2)."""
        f = self.field
        x = f.array(x)
        if x.shape != (self.n,):
            raise DimensionError(f"expected a vector of length {self.n}, got {x.shape}")
        if self.lu.dtype == object:
            y = _solve_object(f, self.lu.T.copy(), x.reshape(-1, 1).astype(object), transposed=True)[:, 0]
        else:
            y = _k.solve_left(self.lu, x.astype(np.float64), f.q, _accumulation_limit(f.q))
        w = np.empty(self.n, dtype=np.int64)
        w[self.perm] = np.asarray(y).astype(np.int64)
        return w

    def inverse(self) -> np.ndarray:
        return self.solve(self.field.identity(self.n))


def _lu_object(field: PrimeField, a: np.ndarray) -> LUFactors:
    q = field.q
    m = np.array(field.array(a).tolist(), dtype=object).reshape(a.shape)
    n = m.shape[0]
    perm = np.arange(n)
    for c in range(n):
        nz = np.flatnonzero(m[c:, c] != 0)
        if nz.size == 0:
            raise SingularMatrixError(c)
        p = c + nz[0]
        if p != c:
            m[[c, p]] = m[[p, c]]
            perm[[c, p]] = perm[[p, c]]
        col = (m[c + 1 :, c] * pow(int(m[c, c]), -1, q)) % q
        m[c + 1 :, c] = col
        m[c + 1 :, c + 1 :] = (m[c + 1 :, c + 1 :] - np.outer(col, m[c, c + 1 :])) % q
    return LUFactors(field, perm, m)


def _solve_object(field: PrimeField, lu: np.ndarray, b: np.ndarray, transposed: bool = False) -> np.ndarray:
    # transposed: lu holds (LU)^T = U^T L^T, i.e. lower non-unit then upper unit
    q = field.q
    n = lu.shape[0]
    x = b.copy()
    for r in range(n):
        x[r] = (x[r] - lu[r, :r] @ x[:r]) % q
        if transposed:
            x[r] = (x[r] * pow(int(lu[r, r]), -1, q)) % q
    for r in range(n - 1, -1, -1):
        x[r] = (x[r] - lu[r, r + 1 :] @ x[r + 1 :]) % q
        if not transposed:
            x[r] = (x[r] * pow(int(lu[r, r]), -1, q)) % q
    return x


def _inverse_table(q: int) -> Optional[np.ndarray]:
    if q > 1 << 16:
        return None
    table = np.zeros(q, dtype=np.int64)
    for x in range(1, q):
        table[x] = pow(x, -1, q)
    return table


def mat_from_vec(v, s: int, t: int) -> np.ndarray:
    """Write a length ``s*t`` vector out row by row as an ``s x t`` matrix."""
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != s * t:
        raise DimensionError(f"vector of length {v.shape} cannot be reshaped to {s}x{t}")
    return v.reshape(s, t).copy()


def interference_rows(field: PrimeField, h: np.ndarray, ltilde: int, g: np.ndarray) -> np.ndarray:
    """``(I_ltilde kron G^T) h`` for ``h`` of shape ``(..., T*ltilde, L)``.

    With ``h = S[:, :T*ltilde]^T``, row ``i*N + j`` (0-based) is the
    coefficient vector of entry (i, j) of the interference matrix built
    from ``W @ S``.  Leading batch axes are carried through.
    """
    h = np.asarray(h)
    t, n = g.shape
    if h.ndim < 2 or h.shape[-2] != t * ltilde:
        raise DimensionError(f"row block of shape {h.shape} incompatible with L~={ltilde}, G {g.shape}")
    length = h.shape[-1]
    if t * (field.q - 1) ** 2 < _EXACT:
        blocks = np.ascontiguousarray(h.reshape(-1, t, length), dtype=np.int64)
        coded = np.empty((blocks.shape[0], n, length), dtype=np.int64)
        _k.code_rows(blocks, np.ascontiguousarray(g, dtype=np.int64), field.q, coded)
    else:
        coded = field.matmul(np.asarray(g).T, h.reshape(h.shape[:-2] + (ltilde, t, length)))
    return coded.reshape(h.shape[:-2] + (ltilde * n, length))


def interference_coefficients(field: PrimeField, s: np.ndarray, ltilde: int, g: np.ndarray) -> np.ndarray:
    """Return ``S[:, :T*ltilde] (I_ltilde kron G)`` without forming the Kronecker product.

    Column ``i*N + j`` (0-based) is the coefficient vector of entry (i, j)
    of the interference matrix built from ``W @ S``.  Only the first
    ``T*ltilde`` columns of ``s`` are read.
    """
    s = np.asarray(s)
    t, n = g.shape
    if s.ndim != 2 or s.shape[1] < t * ltilde or s.shape[0] != n * ltilde:
        raise DimensionError(f"mixing matrix of shape {s.shape} incompatible with L~={ltilde}, G {g.shape}")
    return interference_rows(field, s[:, : t * ltilde].T, ltilde, g).T


def mix_interference(field: PrimeField, w, s, ltilde: int, g) -> np.ndarray:
    """The ``ltilde x N`` matrix ``Mat(W S[:, :T*ltilde] (I kron G))``; each row is a codeword."""
    w = field.array(w)
    s = field.array(s)
    g = field.array(g)
    t, n = g.shape
    if s.ndim != 2 or s.shape[0] != s.shape[1] or w.shape != (s.shape[0],):
        raise DimensionError(f"record {w.shape} and mixing matrix {s.shape} disagree")
    if s.shape[0] != n * ltilde:
        raise DimensionError(f"L={s.shape[0]} must equal N*L~={n * ltilde}")
    head = field.matmul(w, s[:, : t * ltilde])
    return field.matmul(mat_from_vec(head, ltilde, t), g)
