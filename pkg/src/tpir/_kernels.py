"""Compiled inner loops for elimination over F_q.

All arrays are float64 holding exact integers in [0, q).  Callers guarantee
``65 * (q - 1)**2 < 2**53`` so no intermediate loses precision.
"""

import numpy as np
from numba import njit


@njit(inline="always")
def _red(x, q, invq):
    # the floored quotient is off by at most one, so one correction each way
    r = x - np.floor(x * invq) * q
    if r < 0.0:
        r += q
    if r >= q:
        r -= q
    return r


@njit(cache=True)
def modinv(a, q):
    t, new_t = 0, 1
    r, new_r = q, a % q
    while new_r != 0:
        quo = r // new_r
        t, new_t = new_t, t - quo * new_t
        r, new_r = new_r, r - quo * new_r
    if r != 1:
        return -1
    return t % q


@njit(cache=True)
def reduce_(a, q):
    invq = 1.0 / q
    rows, cols = a.shape
    for i in range(rows):
        for j in range(cols):
            a[i, j] = _red(a[i, j], q, invq)


@njit(cache=True)
def reduce_flat(a, q):
    invq = 1.0 / q
    for i in range(a.shape[0]):
        a[i] = _red(a[i], q, invq)


@njit(cache=True)
def panel_factor(m, perm, c0, c1, q):
    """Unblocked PLU on columns [c0, c1) of rows c0.., in place.

    Returns the first column with no pivot (after writing back all work done
    up to it) or -1.  The panel is factored in a transposed scratch copy so
    the inner loops run over contiguous memory; row swaps are applied to
    the rest of ``m`` at the end.
    """
    n = m.shape[0]
    ncols = m.shape[1]
    w = c1 - c0
    h = n - c0
    invq = 1.0 / q
    t = np.empty((w, h), dtype=m.dtype)
    for r in range(h):
        for k in range(w):
            t[k, r] = m[c0 + r, c0 + k]
    piv = np.arange(w)
    bad = -1
    done = w
    for c in range(w):
        p = -1
        for r in range(c, h):
            v = _red(t[c, r], q, invq)
            t[c, r] = v
            if v != 0.0:
                p = r
                break
        if p < 0:
            bad = c0 + c
            done = c
            break
        piv[c] = p
        if p != c:
            for k in range(w):
                tmp = t[k, c]
                t[k, c] = t[k, p]
                t[k, p] = tmp
            tp = perm[c0 + c]
            perm[c0 + c] = perm[c0 + p]
            perm[c0 + p] = tp
        for k in range(c + 1, w):
            t[k, c] = _red(t[k, c], q, invq)
        inv = float(modinv(np.int64(t[c, c]), q))
        for r in range(c + 1, h):
            t[c, r] = _red(_red(t[c, r], q, invq) * inv, q, invq)
        for k in range(c + 1, w):
            u = t[k, c]
            if u != 0.0:
                for r in range(c + 1, h):
                    t[k, r] -= t[c, r] * u
    for r in range(h):
        for k in range(w):
            m[c0 + r, c0 + k] = t[k, r]
    for c in range(done):
        p = piv[c]
        if p != c:
            for k in range(c0):
                tmp = m[c0 + c, k]
                m[c0 + c, k] = m[c0 + p, k]
                m[c0 + p, k] = tmp
            for k in range(c1, ncols):
                tmp = m[c0 + c, k]
                m[c0 + c, k] = m[c0 + p, k]
                m[c0 + p, k] = tmp
    return bad


@njit(cache=True)
def trsm_rows(m, k0, k1, c0, c1, q, lim):
    """m[k0:k1, c0:c1] <- L[k0:k1, k0:k1]^-1 m[k0:k1, c0:c1], L unit lower.

    ``lim`` counts products a row absorbs between reductions; the output rows
    are reduced.
    """
    invq = 1.0 / q
    for k in range(c0, c1):
        m[k0, k] = _red(m[k0, k], q, invq)
    for r in range(k0 + 1, k1):
        cnt = 0
        for s in range(k0, r):
            ell = m[r, s]
            if ell != 0.0:
                for k in range(c0, c1):
                    m[r, k] -= ell * m[s, k]
                cnt += 1
                if cnt == lim:
                    for k in range(c0, c1):
                        m[r, k] = _red(m[r, k], q, invq)
                    cnt = 0
        for k in range(c0, c1):
            m[r, k] = _red(m[r, k], q, invq)


@njit(cache=True)
def solve_lower_unit(lu, b, q, lim):
    """In place: b <- L^-1 b, L unit lower (packed in lu)."""
    n = lu.shape[0]
    invq = 1.0 / q
    cols = b.shape[1]
    for r in range(n):
        cnt = 0
        for s in range(r):
            ell = lu[r, s]
            if ell != 0.0:
                for k in range(cols):
                    b[r, k] -= ell * b[s, k]
                cnt += 1
                if cnt == lim:
                    for k in range(cols):
                        b[r, k] = _red(b[r, k], q, invq)
                    cnt = 0
        for k in range(cols):
            b[r, k] = _red(b[r, k], q, invq)


@njit(cache=True)
def solve_upper(lu, b, q, lim):
    """In place: b <- U^-1 b, U upper with nonzero diagonal (packed in lu)."""
    n = lu.shape[0]
    invq = 1.0 / q
    cols = b.shape[1]
    for r in range(n - 1, -1, -1):
        cnt = 0
        for s in range(r + 1, n):
            u = lu[r, s]
            if u != 0.0:
                for k in range(cols):
                    b[r, k] -= u * b[s, k]
                cnt += 1
                if cnt == lim:
                    for k in range(cols):
                        b[r, k] = _red(b[r, k], q, invq)
                    cnt = 0
        d = float(modinv(np.int64(lu[r, r]), q))
        for k in range(cols):
            b[r, k] = _red(_red(b[r, k], q, invq) * d, q, invq)


@njit(cache=True)
def solve_vector(lu, x, q, lim):
    """In place: x <- U^-1 L^-1 x for one right-hand side (rows of lu read contiguously)."""
    n = lu.shape[0]
    invq = 1.0 / q
    for r in range(n):
        acc = x[r]
        cnt = 0
        for s in range(r):
            acc -= lu[r, s] * x[s]
            cnt += 1
            if cnt == lim:
                acc = _red(acc, q, invq)
                cnt = 0
        x[r] = _red(acc, q, invq)
    for r in range(n - 1, -1, -1):
        acc = x[r]
        cnt = 0
        for s in range(r + 1, n):
            acc -= lu[r, s] * x[s]
            cnt += 1
            if cnt == lim:
                acc = _red(acc, q, invq)
                cnt = 0
        d = float(modinv(np.int64(lu[r, r]), q))
        x[r] = _red(_red(acc, q, invq) * d, q, invq)


@njit(cache=True)
def solve_left(lu, x, q, lim):
    """Solve w (L U) = x for the row vector w (no permutation)."""
    n = lu.shape[0]
    invq = 1.0 / q
    y = x.copy()
    # y U = x  (forward over columns of U)
    for c in range(n):
        acc = y[c]
        cnt = 0
        for s in range(c):
            acc -= y[s] * lu[s, c]
            cnt += 1
            if cnt == lim:
                acc = _red(acc, q, invq)
                cnt = 0
        d = float(modinv(np.int64(lu[c, c]), q))
        y[c] = _red(_red(acc, q, invq) * d, q, invq)
    # w L = y  (backward over columns of unit-lower L)
    for c in range(n - 1, -1, -1):
        acc = y[c]
        cnt = 0
        for s in range(c + 1, n):
            acc -= y[s] * lu[s, c]
            cnt += 1
            if cnt == lim:
                acc = _red(acc, q, invq)
                cnt = 0
        y[c] = _red(acc, q, invq)
    return y


@njit(cache=True)
def code_rows(h, g, q, out):
    """out[i, c, :] = sum_s g[s, c] * h[i, s, :] mod q, for int64 h, g."""
    invq = 1.0 / q
    blocks, t, length = h.shape
    n = g.shape[1]
    gf = g.astype(np.float64)
    acc = np.empty(length)
    for i in range(blocks):
        for c in range(n):
            acc[:] = 0.0
            for s in range(t):
                w = gf[s, c]
                for k in range(length):
                    acc[k] += w * h[i, s, k]
            for k in range(length):
                out[i, c, k] = np.int64(_red(acc[k], q, invq))


@njit(cache=True)
def column_transform(m, y, c, q, lim):
    """Bring a fresh (already permuted) column y into the state of column c.

    Rows < c become U entries (unit-lower solve), rows >= c the remainder
    after eliminating columns < c.  y is float64, reduced on entry and exit.
    """
    invq = 1.0 / q
    n = m.shape[0]
    for r in range(n):
        acc = y[r]
        cnt = 0
        top = r if r < c else c
        for s in range(top):
            acc -= m[r, s] * y[s]
            cnt += 1
            if cnt == lim:
                acc = _red(acc, q, invq)
                cnt = 0
        y[r] = _red(acc, q, invq)
