"""Binary encoding of session headers, queries and answers.

All integers are little-endian. Header: ``b"PMLC"``, u32 version, then q, N,
T, S, M, P, L, K, E, R as u32. Query: u32 server index, u32 entry count,
then per entry a u32 column index followed by PE/K symbols. Answer: u32
server index followed by (PE/K)*(L/E) symbols, row-major. Symbols use the
fixed width given by :func:`pmlc.field.symbol_width`.
"""

from __future__ import annotations

import struct

import numpy as np

from pmlc.field import symbol_width
from pmlc.protocol import Answer, Params, ProtocolError, Query

__all__ = [
    "MAGIC",
    "VERSION",
    "encode_header",
    "decode_header",
    "encode_query",
    "decode_query",
    "encode_answer",
    "decode_answer",
]

MAGIC = b"PMLC"
VERSION = 1
_HEADER = struct.Struct("<4s11I")
_U32 = struct.Struct("<I")
_FIELDS = ("q", "N", "T", "S", "M", "P", "L", "K", "E", "R")
_NUMPY_WIDTH = {1: "<u1", 2: "<u2", 4: "<u4", 8: "<u8"}


def _pack_symbols(values, q: int) -> bytes:
    return np.asarray(values).astype(_NUMPY_WIDTH[symbol_width(q)]).tobytes()


def _unpack_symbols(buf: bytes, offset: int, count: int, q: int) -> tuple[np.ndarray, int]:
    width = symbol_width(q)
    end = offset + count * width
    if end > len(buf):
        raise ProtocolError("truncated message")
    raw = np.frombuffer(buf, dtype=_NUMPY_WIDTH[width], count=count, offset=offset)
    values = raw.astype(np.int64) if q < 2**31 else raw.astype(object)
    if np.any(values >= q):
        raise ProtocolError("symbol out of field range")
    return values, end


def encode_header(params: Params) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, *(getattr(params, f) for f in _FIELDS))


def decode_header(buf: bytes) -> Params:
    if len(buf) < _HEADER.size:
        raise ProtocolError("truncated header")
    magic, version, *values = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported format version {version}")
    return Params(**dict(zip(_FIELDS, values)))


def encode_query(query: Query, params: Params) -> bytes:
    parts = [_U32.pack(query.server_index), _U32.pack(len(query.entries))]
    for ell, vec in query.entries.items():
        if len(vec) != params.width:
            raise ProtocolError(f"entry {ell} has width {len(vec)}, expected {params.width}")
        parts.append(_U32.pack(ell))
        parts.append(_pack_symbols(vec, params.q))
    return b"".join(parts)


def decode_query(buf: bytes, params: Params) -> Query:
    if len(buf) < 8:
        raise ProtocolError("truncated query")
    server, count = struct.unpack_from("<II", buf)
    offset = 8
    entries = {}
    for _ in range(count):
        if offset + 4 > len(buf):
            raise ProtocolError("truncated query")
        (ell,) = _U32.unpack_from(buf, offset)
        vec, offset = _unpack_symbols(buf, offset + 4, params.width, params.q)
        vec.setflags(write=False)
        entries[ell] = vec
    if offset != len(buf):
        raise ProtocolError("trailing bytes after query")
    return Query(server, entries, params.R, params.E)


def encode_answer(answer: Answer, params: Params) -> bytes:
    shape = (params.width, params.piece_length)
    if answer.matrix.shape != shape:
        raise ProtocolError(f"answer has shape {answer.matrix.shape}, expected {shape}")
    return _U32.pack(answer.server_index) + _pack_symbols(answer.matrix.reshape(-1), params.q)


def decode_answer(buf: bytes, params: Params) -> Answer:
    if len(buf) < 4:
        raise ProtocolError("truncated answer")
    (server,) = _U32.unpack_from(buf)
    values, end = _unpack_symbols(buf, 4, params.width * params.piece_length, params.q)
    if end != len(buf):
        raise ProtocolError("trailing bytes after answer")
    matrix = values.reshape(params.width, params.piece_length)
    matrix.setflags(write=False)
    return Answer(server, matrix)
