from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tpir.field import DimensionError, PrimeField
from tpir.mds import CodeParameterError, DuplicatePositionError, make_mds
from tpir.params import default_field_size


def test_generator_examples():
    assert np.array_equal(make_mds(3, 2, PrimeField(3)).g, [[1, 1, 1], [0, 1, 2]])
    assert np.array_equal(make_mds(2, 1, PrimeField(2)).g, [[1, 1]])


def test_n4_t2_q5_all_pairs_invertible():
    code = make_mds(4, 2, PrimeField(5))
    pairs = list(combinations(range(4), 2))
    assert len(pairs) == 6
    for cols in pairs:
        sub = code.g[:, list(cols)]
        assert (int(sub[0, 0]) * int(sub[1, 1]) - int(sub[0, 1]) * int(sub[1, 0])) % 5 != 0


@pytest.mark.parametrize("n,t,q", [(3, 3, 5), (3, 0, 5), (5, 2, 3)])
def test_bad_parameters(n, t, q):
    with pytest.raises(CodeParameterError):
        make_mds(n, t, PrimeField(q))


def test_encode_examples():
    code = make_mds(3, 2, PrimeField(3))
    assert not code.encode([0, 0]).any()
    assert np.array_equal(code.encode([1, 0]), [1, 1, 1])
    assert np.array_equal(code.encode([0, 1]), [0, 1, 2])
    with pytest.raises(DimensionError):
        code.encode([1, 2, 3])


def test_recover_examples():
    code = make_mds(3, 2, PrimeField(3))
    assert np.array_equal(code.recover([(1, 1), (3, 1)]), [1, 1, 1])
    word = code.encode([2, 1])
    assert np.array_equal(code.recover([(1, word[0]), (2, word[1])]), word)
    assert not code.recover([(2, 0), (3, 0)]).any()
    with pytest.raises(DuplicatePositionError):
        code.recover([(2, 1), (2, 1)])
    with pytest.raises(DimensionError):
        code.recover([(1, 1)])


@pytest.mark.parametrize("n", range(2, 7))
def test_mds_property_grid(n):
    for t in range(1, n):
        code = make_mds(n, t, PrimeField(default_field_size(n)))
        assert code.is_mds()


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.data())
def test_recover_round_trip_every_subset(n, data):
    t = data.draw(st.integers(1, n - 1))
    q = data.draw(st.sampled_from([x for x in (2, 3, 5, 7, 11) if x >= n]))
    code = make_mds(n, t, PrimeField(q))
    msg = data.draw(st.lists(st.integers(0, q - 1), min_size=t, max_size=t))
    word = code.encode(msg)
    for pos in combinations(range(1, n + 1), t):
        assert np.array_equal(code.recover([(p, word[p - 1]) for p in pos]), word)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_recover_is_linear(seed):
    f = PrimeField(7)
    code = make_mds(5, 3, f)
    rng = np.random.default_rng(seed)
    x, y = f.random_matrix(3, rng), f.random_matrix(3, rng)
    pos = tuple(sorted(rng.choice(np.arange(1, 6), 3, replace=False)))
    rec = lambda v: code.recover_batch(pos, v)
    assert np.array_equal(rec((x + y) % 7), (rec(x) + rec(y)) % 7)


def test_recover_batch_matches_single():
    f = PrimeField(5)
    code = make_mds(4, 2, f)
    vals = f.random_matrix((6, 2), np.random.default_rng(0))
    batch = code.recover_batch((2, 4), vals)
    for v, w in zip(vals, batch):
        assert np.array_equal(code.recover([(2, v[0]), (4, v[1])]), w)
