"""Binary ``.shamz`` container and dense matrix files.

Container layout (little endian throughout)::

    magic    4s   b"SHMZ"
    version  u8   1
    format   u8   0 ham | 1 sham | 2 csc | 3 imap
    b        u8   word size (32 or 64)
    flags    u8   reserved, 0
    n, m     u32  shape
    k        u32  distinct symbols / centers
    s        f64  non-zero ratio
    payload       format specific, see ``_write_*``
    crc32    u32  over every preceding byte

Huffman dictionaries are ``k`` (u32) followed by ``k`` (f32 symbol, u8
length) pairs in canonical order. Bitstreams are ``bit_len`` (u64) then the
words, each ``b/8`` bytes. Row indices are packed at ``ceil(log2 n)`` bits;
column boundaries are ``b``-bit words.

Dense matrix files are either CSV or raw: an 8-byte magic ``SHAMMAT\\0``,
``n`` and ``m`` as u32, then ``n*m`` float32 values in row-major order.
"""

from __future__ import annotations

import io
import struct
import zlib
from pathlib import Path

import numpy as np

from . import bitpack
from .core import STORAGE_DTYPE, check_matrix
from .formats import CscMatrix, HamMatrix, IndexMapMatrix, ShamMatrix, index_bits
from .huffman import BitStream, CorruptStreamError, HuffmanCode, decode, pack_dictionary, unpack_dictionary

MAGIC = b"SHMZ"
VERSION = 1
TAGS = {"ham": 0, "sham": 1, "csc": 2, "imap": 3}
_HEADER = struct.Struct("<4sBBBBIIId")

RAW_MAGIC = b"SHAMMAT\x00"
_RAW_HEADER = struct.Struct("<8sII")


class CorruptContainerError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        text = f"corrupt container: {message}"
        if offset is not None:
            text += f" (at byte {offset})"
        super().__init__(text)
        self.offset = offset


def _word_le(b):
    return "<u4" if b == 32 else "<u8"


def _write_stream(out, stream: BitStream):
    out.write(struct.pack("<Q", stream.bit_len))
    out.write(stream.words.astype(_word_le(stream.b)).tobytes())


def _write_index(out, ri, n, cb, b):
    width = bitpack.width_for(n)
    out.write(struct.pack("<QB", ri.size, width))
    out.write(bitpack.pack_uint(ri, width))
    out.write(cb.astype(_word_le(b)).tobytes())


def dumps(C) -> bytes:
    out = io.BytesIO()
    q = C.q if hasattr(C, "q") else int(np.count_nonzero(C.to_dense()))
    out.write(_HEADER.pack(MAGIC, VERSION, TAGS[C.format], C.b, 0, C.n, C.m, C.k, q / (C.n * C.m)))
    if C.format == "ham":
        out.write(pack_dictionary(C.code))
        _write_stream(out, C.stream)
    elif C.format == "sham":
        out.write(pack_dictionary(C.code) if C.code is not None else struct.pack("<I", 0))
        _write_stream(out, C.stream)
        _write_index(out, C.ri, C.n, C.cb, C.b)
    elif C.format == "csc":
        out.write(struct.pack("<Q", C.q))
        out.write(C.nz.astype("<f4").tobytes())
        _write_index(out, C.ri, C.n, C.cb, C.b)
    else:
        out.write(struct.pack("<I", C.k))
        out.write(C.centers.astype("<f4").tobytes())
        out.write(struct.pack("<B", C.index_bits))
        out.write(C.indices.astype("<u1" if C.index_bits == 8 else "<u2").tobytes())
    body = out.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, nbytes: int, what: str) -> bytes:
        if nbytes < 0 or self.pos + nbytes > len(self.buf):
            raise CorruptContainerError(f"truncated while reading {what}", self.pos)
        chunk = self.buf[self.pos : self.pos + nbytes]
        self.pos += nbytes
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def array(self, dtype, count: int, what: str) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count, what), dtype=dt)


def _read_code(r: _Reader):
    start = r.pos
    try:
        syms, lens, r.pos = unpack_dictionary(r.buf, r.pos)
    except (ValueError, struct.error) as exc:
        raise CorruptContainerError(f"bad dictionary: {exc}", start) from None
    if syms.size == 0:
        return None
    try:
        return HuffmanCode(syms, lens)
    except ValueError as exc:
        raise CorruptContainerError(f"bad dictionary: {exc}", start) from None


def _read_stream(r: _Reader, b: int) -> tuple[BitStream, int]:
    (bit_len,) = r.unpack("<Q", "stream length")
    start = r.pos
    words = r.array(_word_le(b), -(-bit_len // b), "stream words")
    dtype = np.uint32 if b == 32 else np.uint64
    return BitStream(words.astype(dtype), int(bit_len), b), start


def _read_index(r: _Reader, n: int, m: int, b: int):
    q, width = r.unpack("<QB", "row index header")
    if width != bitpack.width_for(n):
        raise CorruptContainerError("unexpected row index width", r.pos - 1)
    start = r.pos
    ri = bitpack.unpack_uint(r.take(bitpack.packed_size(width, q), "row indices"), width, q)
    cb = r.array(_word_le(b), m + 1, "column boundaries").astype(np.int64)
    if cb[0] != 0 or np.any(np.diff(cb) < 0) or cb[-1] != q or (q and ri.max() >= n):
        raise CorruptContainerError("inconsistent row indices or column boundaries", start)
    return ri, cb


def _with_counts(code: HuffmanCode, stream: BitStream, n_symbols: int, stream_offset: int) -> HuffmanCode:
    try:
        seq = decode(stream, code, n_symbols)
    except CorruptStreamError as exc:
        off = None if exc.bit is None else stream_offset + exc.bit // 8
        raise CorruptContainerError(str(exc), off) from None
    counts = np.bincount(code.index_of(seq), minlength=code.k)
    if np.any(counts == 0):
        raise CorruptContainerError("dictionary holds unused symbols", stream_offset)
    return HuffmanCode(code.symbols, code.lengths, counts)


def loads(buf: bytes):
    buf = bytes(buf)
    if len(buf) < _HEADER.size + 4:
        raise CorruptContainerError("truncated header", len(buf))
    magic, version, tag, b, _flags, n, m, k, _s = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise CorruptContainerError("bad magic", 0)
    if version != VERSION:
        raise CorruptContainerError(f"unsupported version {version}", 4)
    if b not in (32, 64):
        raise CorruptContainerError(f"bad word size {b}", 6)
    if n < 1 or m < 1:
        raise CorruptContainerError("bad shape", 8)
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    r = _Reader(body)
    r.pos = _HEADER.size
    fmt = {v: key for key, v in TAGS.items()}.get(tag)
    if fmt is None:
        raise CorruptContainerError(f"unknown format tag {tag}", 5)
    if fmt == "ham":
        code = _read_code(r)
        stream, soff = _read_stream(r, b)
    elif fmt == "sham":
        code = _read_code(r)
        stream, soff = _read_stream(r, b)
        ri, cb = _read_index(r, n, m, b)
    elif fmt == "csc":
        (q,) = r.unpack("<Q", "non-zero count")
        nz = r.array("<f4", q, "non-zero values").astype(STORAGE_DTYPE)
        ri, cb = _read_index(r, n, m, b)
    else:
        (kc,) = r.unpack("<I", "center count")
        centers = r.array("<f4", kc, "centers").astype(STORAGE_DTYPE)
        (bbar,) = r.unpack("<B", "index width")
        if kc < 1 or bbar != index_bits(kc):
            raise CorruptContainerError("inconsistent index width", r.pos - 1)
        idx = r.array("<u1" if bbar == 8 else "<u2", n * m, "indices")
        idx = idx.astype(np.uint8 if bbar == 8 else np.uint16)
    if r.pos != len(body):
        raise CorruptContainerError("trailing bytes after payload", r.pos)
    if zlib.crc32(body) != crc:
        raise CorruptContainerError(f"checksum mismatch (stored {crc:#010x}, computed {zlib.crc32(body):#010x})")

    try:
        if fmt == "ham":
            if code is None:
                raise CorruptContainerError("empty dictionary", _HEADER.size)
            return HamMatrix(n, m, stream, _with_counts(code, stream, n * m, soff))
        if fmt == "sham":
            if code is None:
                if stream.bit_len or ri.size:
                    raise CorruptContainerError("stream without dictionary", _HEADER.size)
                return ShamMatrix(n, m, stream, None, ri, cb)
            return ShamMatrix(n, m, stream, _with_counts(code, stream, ri.size, soff), ri, cb)
        if fmt == "csc":
            return CscMatrix(n, m, nz, ri, cb, b)
        return IndexMapMatrix(n, m, centers, idx, b)
    except CorruptContainerError:
        raise
    except ValueError as exc:
        raise CorruptContainerError(str(exc)) from None


def save(path, C) -> int:
    data = dumps(C)
    Path(path).write_bytes(data)
    return len(data)


def load(path):
    return loads(Path(path).read_bytes())


# Dense matrices


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64).astype(STORAGE_DTYPE)
    buf = path.read_bytes()
    if len(buf) < _RAW_HEADER.size:
        raise CorruptContainerError("truncated matrix header", len(buf))
    magic, n, m = _RAW_HEADER.unpack_from(buf, 0)
    if magic != RAW_MAGIC:
        raise CorruptContainerError("bad matrix magic", 0)
    if len(buf) != _RAW_HEADER.size + 4 * n * m:
        raise CorruptContainerError("matrix size does not match its header", _RAW_HEADER.size)
    return np.frombuffer(buf, dtype="<f4", offset=_RAW_HEADER.size).reshape(n, m).astype(STORAGE_DTYPE)


def write_matrix(path, W) -> None:
    path = Path(path)
    W = np.atleast_2d(np.asarray(W))
    if path.suffix.lower() == ".csv":
        np.savetxt(path, W, delimiter=",", fmt="%.9g")
        return
    W = check_matrix(W)
    path.write_bytes(_RAW_HEADER.pack(RAW_MAGIC, W.shape[0], W.shape[1]) + W.astype("<f4").tobytes())
