from collections import Counter
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tpir.field import (
    DimensionError,
    FieldError,
    PrimeField,
    SingularMatrixError,
    ZeroInverseError,
    interference_coefficients,
    mat_from_vec,
    mix_interference,
)
from tpir.mds import make_mds

PRIMES = [2, 3, 5, 7, 13, 251, 65521, 2**31 - 1, 2**61 - 1]


def slow_rank(a, q):
    m = [[int(x) % q for x in row] for row in a]
    rank, cols = 0, len(m[0]) if m else 0
    for c in range(cols):
        piv = next((r for r in range(rank, len(m)) if m[r][c]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = pow(m[rank][c], -1, q)
        m[rank] = [x * inv % q for x in m[rank]]
        for r in range(len(m)):
            if r != rank and m[r][c]:
                f = m[r][c]
                m[r] = [(x - f * y) % q for x, y in zip(m[r], m[rank])]
        rank += 1
    return rank


def slow_matmul(a, b, q):
    a = [[int(x) for x in r] for r in np.atleast_2d(a)]
    b = [[int(x) for x in r] for r in b]
    return np.array([[sum(x * y for x, y in zip(row, col)) % q for col in zip(*b)] for row in a], dtype=np.int64)


@pytest.mark.parametrize(
    "q,a,b,op,want",
    [(3, 2, 2, "add", 1), (3, 2, 2, "mul", 1), (5, 0, 4, "mul", 0), (7, 3, 5, "sub", 5)],
)
def test_scalar_examples(q, a, b, op, want):
    assert PrimeField(q).arith(a, b, op) == want


@pytest.mark.parametrize("q,a,want", [(3, 2, 2), (5, 3, 2), (7, 1, 1)])
def test_inverse_examples(q, a, want):
    assert PrimeField(q).inv(a) == want


def test_zero_has_no_inverse():
    with pytest.raises(ZeroInverseError):
        PrimeField(5).inv(0)


@pytest.mark.parametrize("q", [1, 4, 9, 0])
def test_composite_modulus_rejected(q):
    with pytest.raises(FieldError):
        PrimeField(q)


@given(st.sampled_from(PRIMES), st.integers(min_value=1))
def test_inverse_is_involution(q, a):
    f = PrimeField(q)
    a = a % q or 1
    assert f.mul(f.inv(a), a) == 1
    assert f.inv(f.inv(a)) == a


def test_matmul_examples():
    f = PrimeField(3)
    b = np.array([[1, 2, 0], [2, 2, 1]])
    assert np.array_equal(f.matmul(f.identity(2), b), b)
    assert np.array_equal(f.matmul([1, 2], [[1, 0], [1, 1]]), [0, 2])
    with pytest.raises(DimensionError):
        f.matmul(np.ones((2, 3), int), np.ones((2, 3), int))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(PRIMES), st.integers(1, 40), st.integers(1, 40), st.integers(1, 5), st.integers(0, 2**32))
def test_matmul_matches_bigint(q, n, k, m, seed):
    f = PrimeField(q)
    rng = np.random.default_rng(seed)
    a, b = f.random_matrix((n, k), rng), f.random_matrix((k, m), rng)
    assert np.array_equal(f.matmul(a, b), slow_matmul(a, b, q))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(PRIMES), st.integers(1, 12), st.integers(0, 2**32))
def test_matmul_associative(q, n, seed):
    f = PrimeField(q)
    rng = np.random.default_rng(seed)
    a, b, c = (f.random_matrix((n, n), rng) for _ in range(3))
    assert np.array_equal(f.matmul(f.matmul(a, b), c), f.matmul(a, f.matmul(b, c)))


def test_inverse_examples_matrix():
    f = PrimeField(3)
    assert np.array_equal(f.inverse(f.identity(4)), f.identity(4))
    assert np.array_equal(f.inverse([[1, 1], [0, 1]]), [[1, 2], [0, 1]])


def test_gl2_over_f2_round_trips():
    f = PrimeField(2)
    found = 0
    for bits in product(range(2), repeat=4):
        a = np.array(bits).reshape(2, 2)
        if slow_rank(a, 2) == 2:
            found += 1
            assert np.array_equal(f.matmul(a, f.inverse(a)), f.identity(2))
            assert np.array_equal(f.matmul(f.inverse(a), a), f.identity(2))
        else:
            with pytest.raises(SingularMatrixError):
                f.inverse(a)
    assert found == 6


def test_singular_error_carries_column():
    with pytest.raises(SingularMatrixError) as info:
        PrimeField(5).inverse([[1, 2, 0], [2, 4, 0], [0, 0, 1]])
    assert info.value.column == 1


# sizes straddle the recursive block and leaf thresholds
@pytest.mark.parametrize("q", PRIMES)
@pytest.mark.parametrize("n", [1, 2, 7, 17, 70, 150])
def test_inverse_round_trip_sizes(q, n):
    if q > 2**40 and n > 70:
        pytest.skip("object arithmetic is slow at this size")
    f = PrimeField(q)
    rng = np.random.default_rng(q * 1000 + n)
    a = f.random_invertible(n, rng)
    inv = f.inverse(a)
    assert np.array_equal(f.matmul(a, inv), f.identity(n))
    assert np.array_equal(f.matmul(inv, a), f.identity(n))


@pytest.mark.parametrize("q", [2, 3, 7, 65521])
@pytest.mark.parametrize("shape", [(5, 5), (20, 12), (90, 70), (140, 140)])
def test_rank_test_agrees_with_reference(q, shape):
    f = PrimeField(q)
    rng = np.random.default_rng(sum(shape) + q)
    for trial in range(4):
        a = f.random_matrix(shape, rng)
        if trial % 2:
            # force a dependency among the columns
            a[:, -1] = (a[:, 0] * 2 + a[:, 1]) % q
        assert f.has_full_column_rank(a) == (slow_rank(a, q) == shape[1])
        assert f.has_full_row_rank(a.T) == (slow_rank(a, q) == shape[1])


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 3, 5, 251]), st.integers(1, 30), st.integers(0, 2**32))
def test_solve_and_solve_left(q, n, seed):
    f = PrimeField(q)
    rng = np.random.default_rng(seed)
    a, fac = f.random_invertible_lu(n, rng)
    b = f.random_matrix(n, rng)
    assert np.array_equal(f.matmul(a, fac.solve(b)), b)
    assert np.array_equal(f.matmul(fac.solve_left(b), a), b)


def test_random_invertible_dim1_uniform():
    f = PrimeField(3)
    rng = np.random.default_rng(1)
    counts = Counter(int(f.random_invertible(1, rng)[0, 0]) for _ in range(4000))
    assert set(counts) == {1, 2}
    assert abs(counts[1] - 2000) < 200


def _chi_square(counts: Counter, cells: int, draws: int) -> float:
    expected = draws / cells
    missing = (cells - len(counts)) * expected
    return sum((c - expected) ** 2 / expected for c in counts.values()) + missing


@pytest.mark.parametrize("dim,q,order", [(2, 2, 6), (2, 3, 48), (3, 2, 168)])
def test_random_invertible_uniform_on_group(dim, q, order):
    f = PrimeField(q)
    rng = np.random.default_rng(dim * 10 + q)
    draws = order * 200
    counts = Counter(f.random_invertible(dim, rng).tobytes() for _ in range(draws))
    assert len(counts) == order
    stat = _chi_square(counts, order, draws)
    # chi-square with order-1 dof: mean order-1, sd sqrt(2(order-1))
    assert stat < order - 1 + 5 * np.sqrt(2 * (order - 1))


def test_random_full_row_rank_uniform():
    f = PrimeField(2)
    rng = np.random.default_rng(5)
    draws = 42 * 200  # 2x3 full-rank binary matrices: (8-1)(8-2) = 42
    counts = Counter()
    for _ in range(draws):
        h = f.random_full_row_rank(2, 3, rng)
        assert slow_rank(h, 2) == 2
        counts[h.tobytes()] += 1
    assert len(counts) == 42
    assert _chi_square(counts, 42, draws) < 41 + 5 * np.sqrt(82)


def test_batch_sampler_uniform():
    f = PrimeField(2)
    stack = f.random_invertible_batch(6 * 400, 2, np.random.default_rng(2))
    assert f.nonsingular_mask(stack).all()
    counts = Counter(m.tobytes() for m in stack)
    assert len(counts) == 6
    assert _chi_square(counts, 6, len(stack)) < 5 + 5 * np.sqrt(10)


def test_random_invertible_reproducible():
    f = PrimeField(7)
    a = f.random_invertible(40, np.random.default_rng(3))
    b = f.random_invertible(40, np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_large_sampled_matrices_are_invertible():
    f = PrimeField(5)
    a, fac = f.random_invertible_lu(300, np.random.default_rng(0))
    assert np.array_equal(f.matmul(a, fac.inverse()), f.identity(300))


def test_mat_from_vec():
    assert np.array_equal(mat_from_vec([1, 2, 0, 0, 1, 2], 2, 3), [[1, 2, 0], [0, 1, 2]])
    assert np.array_equal(mat_from_vec([4, 5], 1, 2), [[4, 5]])
    v = np.arange(12)
    assert np.array_equal(mat_from_vec(v, 3, 4).reshape(-1), v)
    with pytest.raises(DimensionError):
        mat_from_vec([1, 2, 3], 2, 2)


def test_mix_interference_unit_vector():
    f = PrimeField(3)
    code = make_mds(3, 2, f)
    # W S = e_1 with S = I, W = e_1
    out = mix_interference(f, [1, 0, 0], f.identity(3), 1, code.g)
    assert np.array_equal(out, code.g[:1])
    assert not mix_interference(f, [0, 0, 0], f.identity(3), 1, code.g).any()


def test_mix_interference_rows_are_codewords():
    f = PrimeField(3)
    code = make_mds(3, 2, f)
    rng = np.random.default_rng(0)
    s = f.random_invertible(9, rng)
    w = f.random_matrix(9, rng)
    out = mix_interference(f, w, s, 3, code.g)
    for row in out:
        for pos in [(1, 2), (1, 3), (2, 3)]:
            assert np.array_equal(code.recover([(p, row[p - 1]) for p in pos]), row)
    # the coefficient form gives the same matrix
    coeffs = interference_coefficients(f, s, 3, code.g)
    assert np.array_equal(f.matmul(w, coeffs).reshape(3, 3), out)
