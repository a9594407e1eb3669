"""Little-endian binary formats for databases, queries and answers, plus
the 4-byte length prefix used on sockets."""

from __future__ import annotations

import struct

import numpy as np

from .protocol import Answer, Query, RecordSet

VERSION = 1
_U64 = np.dtype("<u8")


class WireError(ValueError):
    pass


class MalformedHeaderError(WireError):
    pass


class TruncatedMessageError(WireError):
    pass


class ValueRangeError(WireError):
    pass


class UnknownVersionError(WireError):
    pass


_DB = struct.Struct("<4sIQIQ")
_QUERY = struct.Struct("<4sIQIQI")
_ANSWER = struct.Struct("<4sII")
_FRAME = struct.Struct("<I")
_HEADERS = {b"PIRD": _DB, b"PIRQ": _QUERY, b"PIRA": _ANSWER}


def _values(buf: bytes, offset: int, count: int, q: int | None) -> np.ndarray:
    need = offset + 8 * count
    if len(buf) < need:
        raise TruncatedMessageError(f"expected {need} bytes, got {len(buf)}")
    if len(buf) > need:
        raise MalformedHeaderError(f"{len(buf) - need} trailing bytes after payload")
    vals = np.frombuffer(buf, dtype=_U64, count=count, offset=offset)
    if q is not None and count and int(vals.max()) >= q:
        raise ValueRangeError(f"value {int(vals.max())} not below q={q}")
    return vals.astype(np.int64)


def _pack(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype=_U64).tobytes()


def encode_records(db: RecordSet) -> bytes:
    return _DB.pack(b"PIRD", VERSION, db.q, db.M, db.L) + _pack(db.data)


def encode_query(query: Query) -> bytes:
    c = query.coeffs
    if c.shape != (c.shape[0], query.M * query.L):
        raise WireError(f"query matrix shape {c.shape} does not match M={query.M}, L={query.L}")
    return _QUERY.pack(b"PIRQ", VERSION, query.q, query.M, query.L, c.shape[0]) + _pack(c)


def encode_answer(answer: Answer) -> bytes:
    v = np.asarray(answer.values)
    return _ANSWER.pack(b"PIRA", VERSION, v.shape[0]) + _pack(v)


def encode_message(payload) -> bytes:
    if isinstance(payload, RecordSet):
        return encode_records(payload)
    if isinstance(payload, Query):
        return encode_query(payload)
    if isinstance(payload, Answer):
        return encode_answer(payload)
    raise WireError(f"cannot encode {type(payload).__name__}")


def decode_message(buf: bytes, *, server: int = 0):
    """Parse any of the three formats.

    Neither queries nor answers carry the server index; ``server`` fills it in.
    """
    buf = bytes(buf)
    if len(buf) < 8:
        raise TruncatedMessageError(f"{len(buf)} bytes is shorter than any header")
    magic = buf[:4]
    head = _HEADERS.get(magic)
    if head is None:
        raise MalformedHeaderError(f"unknown magic {magic!r}")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise UnknownVersionError(f"version {version}, this build reads {VERSION}")
    if len(buf) < head.size:
        raise TruncatedMessageError(f"header needs {head.size} bytes, got {len(buf)}")
    fields = head.unpack_from(buf)
    if magic == b"PIRD":
        _, _, q, m, length = fields
        _check_q(q)
        data = _values(buf, head.size, m * length, q)
        return RecordSet(q, data.reshape(m, length))
    if magic == b"PIRQ":
        _, _, q, m, length, slots = fields
        _check_q(q)
        data = _values(buf, head.size, slots * m * length, q)
        return Query(server, q, m, length, data.reshape(slots, m * length))
    _, _, slots = fields
    # answers carry no modulus; the client range-checks against its own q
    return Answer(server, _values(buf, head.size, slots, None))


def _check_q(q: int) -> None:
    if q < 2 or q >= 1 << 63:
        raise MalformedHeaderError(f"field size {q} out of range")


def frame(payload: bytes) -> bytes:
    return _FRAME.pack(len(payload)) + payload


def read_frame(sock) -> bytes:
    """Read one length-prefixed message from a socket."""
    (n,) = _FRAME.unpack(_recv_exact(sock, _FRAME.size))
    return _recv_exact(sock, n)


def _recv_exact(sock, n: int) -> bytes:
    chunks, got = [], 0
    while got < n:
        part = sock.recv(min(n - got, 1 << 20))
        if not part:
            raise TruncatedMessageError(f"connection closed after {got} of {n} bytes")
        chunks.append(part)
        got += len(part)
    return b"".join(chunks)
