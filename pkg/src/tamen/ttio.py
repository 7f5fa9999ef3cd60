"""Binary serialization of tensor trains (TTV1 vectors, TTO1 operators).

Layout, little-endian throughout::

    magic   4 bytes  b"TTV1" | b"TTO1"
    d       u32
    kind    u32      0 = float64, 1 = complex128
    modes   d x u32  (operators: d row sizes, then d column sizes)
    ranks   (d+1) x u32
    cores   core data in core order, leading rank fastest, trailing rank slowest

Operator cores are stored as ``(R0, m, n, R1)`` arrays in the same
leading-index-fastest order.
"""
from __future__ import annotations

import os
import struct

import numpy as np

from .tt import TTOperator, TTVector

MAGIC_VECTOR = b"TTV1"
MAGIC_OPERATOR = b"TTO1"
_KINDS = {0: np.dtype("<f8"), 1: np.dtype("<c16")}


class TTFormatError(ValueError):
    pass


def _kind(dtype):
    return 1 if np.issubdtype(dtype, np.complexfloating) else 0


def _pack_u32(values):
    return struct.pack(f"<{len(values)}I", *[int(v) for v in values])


def dumps_vector(x: TTVector) -> bytes:
    kind = _kind(x.dtype)
    dt = _KINDS[kind]
    parts = [MAGIC_VECTOR, _pack_u32([x.d, kind]), _pack_u32(x.n), _pack_u32(x.ranks)]
    for c in x.cores:
        parts.append(np.asarray(c, dtype=dt).tobytes(order="F"))
    return b"".join(parts)


def dumps_operator(A: TTOperator) -> bytes:
    kind = _kind(A.dtype)
    dt = _KINDS[kind]
    parts = [
        MAGIC_OPERATOR,
        _pack_u32([A.d, kind]),
        _pack_u32(A.row_shape.dims),
        _pack_u32(A.col_shape.dims),
        _pack_u32(A.ranks),
    ]
    for c in A.cores:
        parts.append(np.asarray(c, dtype=dt).tobytes(order="F"))
    return b"".join(parts)


class _Reader:
    def __init__(self, buf):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, nbytes):
        if self.pos + nbytes > len(self.buf):
            raise TTFormatError("truncated tensor-train file")
        out = self.buf[self.pos:self.pos + nbytes]
        self.pos += nbytes
        return out

    def u32(self, count=1):
        return list(struct.unpack(f"<{count}I", self.take(4 * count)))


def _header(reader, magic):
    got = bytes(reader.take(4))
    if got != magic:
        raise TTFormatError(f"bad magic {got!r}, expected {magic!r}")
    d, kind = reader.u32(2)
    if d < 1:
        raise TTFormatError("dimension must be positive")
    if kind not in _KINDS:
        raise TTFormatError(f"unknown scalar kind {kind}")
    return d, _KINDS[kind]


def _read_core(reader, shape, dt):
    count = int(np.prod(shape))
    raw = reader.take(count * dt.itemsize)
    return np.frombuffer(raw, dtype=dt).reshape(shape, order="F").astype(dt.newbyteorder("="))


def loads_vector(buf: bytes) -> TTVector:
    reader = _Reader(buf)
    d, dt = _header(reader, MAGIC_VECTOR)
    modes = reader.u32(d)
    ranks = reader.u32(d + 1)
    cores = [_read_core(reader, (ranks[k], modes[k], ranks[k + 1]), dt) for k in range(d)]
    if reader.pos != len(reader.buf):
        raise TTFormatError("trailing bytes after tensor-train data")
    return TTVector(cores)


def loads_operator(buf: bytes) -> TTOperator:
    reader = _Reader(buf)
    d, dt = _header(reader, MAGIC_OPERATOR)
    rows = reader.u32(d)
    cols = reader.u32(d)
    ranks = reader.u32(d + 1)
    cores = [
        _read_core(reader, (ranks[k], rows[k], cols[k], ranks[k + 1]), dt) for k in range(d)
    ]
    if reader.pos != len(reader.buf):
        raise TTFormatError("trailing bytes after tensor-train data")
    return TTOperator(cores)


def save_vector(path, x: TTVector):
    with open(os.fspath(path), "wb") as fh:
        fh.write(dumps_vector(x))


def load_vector(path) -> TTVector:
    with open(os.fspath(path), "rb") as fh:
        return loads_vector(fh.read())


def save_operator(path, A: TTOperator):
    with open(os.fspath(path), "wb") as fh:
        fh.write(dumps_operator(A))


def load_operator(path) -> TTOperator:
    with open(os.fspath(path), "rb") as fh:
        return loads_operator(fh.read())
