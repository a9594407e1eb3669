import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tpir.field import PrimeField
from tpir.mds import make_mds
from tpir.params import derive_params
from tpir.protocol import Answer, Query, RecordSet, client_query, reconstruct, server_answer
from tpir.transport import fetch_answers, serve_in_thread
from tpir.wire import (
    MalformedHeaderError,
    TruncatedMessageError,
    UnknownVersionError,
    ValueRangeError,
    decode_message,
    encode_message,
)


def table_queries(seed=0):
    p = derive_params(3, 3, 2, 3)
    code = make_mds(3, 2, PrimeField(3))
    state, queries = client_query(p, 1 + seed % 3, code, np.random.default_rng(seed))
    return p, code, state, queries


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_query_round_trip(seed):
    _, _, _, queries = table_queries(seed)
    for qj in queries:
        back = decode_message(encode_message(qj), server=qj.server)
        assert (back.server, back.q, back.M, back.L) == (qj.server, qj.q, qj.M, qj.L)
        assert np.array_equal(back.coeffs, qj.coeffs)


def test_records_and_answer_round_trip():
    db = RecordSet.random(3, 9, 3, np.random.default_rng(0))
    back = decode_message(encode_message(db))
    assert back.q == 3 and np.array_equal(back.data, db.data)
    ans = Answer(2, np.array([0, 2, 1, 1]))
    assert np.array_equal(decode_message(encode_message(ans), server=2).values, ans.values)


def test_layouts_are_little_endian():
    db = RecordSet(5, np.array([[1, 2], [3, 4]]))
    raw = encode_message(db)
    assert raw[:4] == b"PIRD"
    assert struct.unpack_from("<IQIQ", raw, 4) == (1, 5, 2, 2)
    assert struct.unpack_from("<4Q", raw, 28) == (1, 2, 3, 4)
    q = encode_message(Query(1, 5, 2, 2, np.array([[1, 0, 0, 4]])))
    assert q[:4] == b"PIRQ" and struct.unpack_from("<IQIQI", q, 4) == (1, 5, 2, 2, 1)
    assert len(q) == 4 + 4 + 8 + 4 + 8 + 4 + 4 * 8


def test_empty_answer_is_header_only():
    raw = encode_message(Answer(1, np.zeros(0, dtype=np.int64)))
    assert raw == b"PIRA" + struct.pack("<II", 1, 0)
    assert decode_message(raw).values.shape == (0,)


def test_decode_errors():
    _, _, _, queries = table_queries()
    raw = encode_message(queries[0])
    with pytest.raises(MalformedHeaderError):
        decode_message(b"XIRQ" + raw[4:])
    with pytest.raises(UnknownVersionError):
        decode_message(raw[:4] + struct.pack("<I", 2) + raw[8:])
    with pytest.raises(TruncatedMessageError):
        decode_message(raw[:-1])
    with pytest.raises(TruncatedMessageError):
        decode_message(raw[:20])
    with pytest.raises(MalformedHeaderError):
        decode_message(raw + b"\0")
    too_big = bytearray(raw)
    too_big[-8:] = struct.pack("<Q", 3)
    with pytest.raises(ValueRangeError):
        decode_message(bytes(too_big))


def test_socket_round_matches_in_process():
    p, code, state, queries = table_queries(5)
    db = RecordSet.random(3, 9, 3, np.random.default_rng(1))
    servers = [serve_in_thread(db) for _ in range(3)]
    try:
        remote = fetch_answers([s.server_address for s in servers], queries)
    finally:
        for s in servers:
            s.shutdown()
            s.server_close()
    local = [server_answer(qj, db) for qj in queries]
    for a, b in zip(remote, local):
        assert a.server == b.server and encode_message(a) == encode_message(b)
    assert np.array_equal(reconstruct(state, remote, code), db.record(state.theta))
