"""Canonical Huffman codes over float32 symbols and word-packed bitstreams.

Tree construction merges the two lightest nodes, breaking ties by creation
order (leaves are created in ascending symbol order). Only the resulting
codeword lengths are kept: codewords are then assigned canonically by
``(length, symbol)``, so a code is fully described by its symbols and
lengths. Bits are packed MSB first into ``b``-bit words and the last word is
zero padded; the exact bit length travels with the stream.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _jit
from .core import STORAGE_DTYPE, check_word_bits

MAX_CODE_LEN = 64


class CorruptStreamError(ValueError):
    """Raised when a bitstream cannot be decoded; ``bit`` is the offset."""

    def __init__(self, message: str, bit: int | None = None):
        super().__init__(message if bit is None else f"{message} (at bit {bit})")
        self.bit = bit


@dataclass(frozen=True, eq=False)
class SymbolTable:
    symbols: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if self.symbols.size != self.counts.size:
            raise ValueError("symbols and counts differ in length")
        if self.symbols.size and (np.any(np.diff(self.symbols) <= 0) or np.any(self.counts < 1)):
            raise ValueError("symbols must be strictly increasing and counts positive")

    @classmethod
    def from_values(cls, values) -> "SymbolTable":
        v = np.asarray(values, dtype=STORAGE_DTYPE).ravel() + STORAGE_DTYPE(0.0)
        symbols, counts = np.unique(v, return_counts=True)
        return cls(symbols, counts.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self):
        return int(self.symbols.size)


def huffman_lengths(counts) -> np.ndarray:
    """Codeword lengths of a Huffman tree for ``counts`` (in symbol order)."""
    k = len(counts)
    if k == 0:
        raise ValueError("cannot build a code for an empty table")
    if k == 1:
        return np.ones(1, dtype=np.int64)
    heap = [(int(c), i) for i, c in enumerate(counts)]
    heapq.heapify(heap)
    parent = [-1] * (2 * k - 1)
    next_id = k
    while len(heap) > 1:
        w1, a = heapq.heappop(heap)
        w2, b = heapq.heappop(heap)
        parent[a] = parent[b] = next_id
        heapq.heappush(heap, (w1 + w2, next_id))
        next_id += 1
    depth = [0] * (2 * k - 1)
    for node in range(2 * k - 3, -1, -1):  # parents are created after children
        depth[node] = depth[parent[node]] + 1
    lengths = np.asarray(depth[:k], dtype=np.int64)
    if lengths.max() > MAX_CODE_LEN:
        lengths = _limit_lengths(lengths, counts, MAX_CODE_LEN)
    return lengths


def _limit_lengths(lengths, counts, limit):
    """Clip to ``limit`` bits, then push the rarest short codewords one level
    deeper until the Kraft sum is back to at most one.

    Only reachable with counts skewed like a Fibonacci sequence beyond ~2^45.
    """
    lengths = np.minimum(lengths, limit)
    excess = sum(1 << (limit - int(L)) for L in lengths) - (1 << limit)
    # Deepest first, rarest first within a depth.
    order = sorted(range(len(lengths)), key=lambda i: (-int(lengths[i]), int(counts[i])))
    while excess > 0:
        i = next(i for i in order if lengths[i] < limit)
        excess -= 1 << (limit - int(lengths[i]) - 1)
        lengths[i] += 1
        order.sort(key=lambda j: (-int(lengths[j]), int(counts[j])))
    return lengths


class HuffmanCode:
    """Prefix code over sorted float32 symbols.

    Per-symbol arrays (``symbols``, ``lengths``, ``codes``, ``counts``) are
    in ascending symbol order. ``canonical_*`` arrays and the per-length
    ``first``/``count``/``offset`` tables drive decoding.
    """

    def __init__(self, symbols, lengths, counts=None):
        symbols = np.asarray(symbols, dtype=STORAGE_DTYPE)
        lengths = np.asarray(lengths, dtype=np.int64)
        if symbols.size == 0:
            raise ValueError("empty code")
        if np.any(np.diff(symbols) <= 0):
            raise ValueError("symbols must be strictly increasing")
        if lengths.min() < 1 or lengths.max() > MAX_CODE_LEN:
            raise ValueError(f"codeword lengths must lie in [1, {MAX_CODE_LEN}]")
        self.symbols = symbols
        self.lengths = lengths
        self.counts = None if counts is None else np.asarray(counts, dtype=np.int64)
        self.max_len = int(lengths.max())

        order = np.lexsort((symbols, lengths))
        per_len = np.bincount(lengths, minlength=self.max_len + 2)
        if symbols.size > 1 and np.sum(per_len[1:] / 2.0 ** np.arange(1, per_len.size)) > 1.0:
            raise ValueError("lengths violate the Kraft inequality")
        first = np.zeros(self.max_len + 2, dtype=np.uint64)
        offset = np.zeros(self.max_len + 2, dtype=np.int64)
        code = 0
        for L in range(1, self.max_len + 1):
            code = (code + int(per_len[L - 1])) << 1 if L > 1 else 0
            first[L] = code
            offset[L] = offset[L - 1] + per_len[L - 1] if L > 1 else 0
        codes = np.zeros(symbols.size, dtype=np.uint64)
        for rank, idx in enumerate(order):
            L = lengths[idx]
            codes[idx] = int(first[L]) + rank - int(offset[L])
        self.codes = codes
        self.canonical_order = order
        self.canonical_symbols = symbols[order]
        self.first = first
        self.count = per_len.astype(np.int64)
        self.offset = offset

    @property
    def k(self) -> int:
        return int(self.symbols.size)

    def codeword(self, symbol) -> str:
        i = self.index_of(np.asarray([symbol]))[0]
        return format(int(self.codes[i]), f"0{self.lengths[i]}b")

    @property
    def encode_map(self) -> dict:
        return {float(s): self.codeword(s) for s in self.symbols}

    @property
    def decode_map(self) -> dict:
        return {cw: s for s, cw in self.encode_map.items()}

    def index_of(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=STORAGE_DTYPE).ravel() + STORAGE_DTYPE(0.0)
        idx = np.searchsorted(self.symbols, v)
        idx_c = np.minimum(idx, self.k - 1)
        bad = (idx >= self.k) | (self.symbols[idx_c] != v)
        if np.any(bad):
            raise KeyError(f"symbol {v[np.argmax(bad)]!r} is not in the code")
        return idx_c

    def _probs(self):
        if self.counts is None:
            raise ValueError("code carries no symbol counts")
        return self.counts / self.counts.sum()

    @property
    def avg_len(self) -> float:
        return float(np.sum(self._probs() * self.lengths))

    @property
    def entropy(self) -> float:
        p = self._probs()
        return float(-np.sum(p * np.log2(p)))

    def kraft_sum(self) -> float:
        return float(np.sum(2.0 ** -self.lengths.astype(np.float64)))

    @cached_property
    def canonical_values(self) -> np.ndarray:
        return self.canonical_symbols.astype(np.float64)

    def __repr__(self):
        return f"HuffmanCode(k={self.k}, max_len={self.max_len})"


def build_code(table: SymbolTable) -> HuffmanCode:
    if len(table) == 0:
        raise ValueError("cannot build a code for an empty table")
    return HuffmanCode(table.symbols, huffman_lengths(table.counts), table.counts)


@dataclass(frozen=True, eq=False)
class BitStream:
    words: np.ndarray
    bit_len: int
    b: int = 32

    def __post_init__(self):
        check_word_bits(self.b)
        if self.words.size != -(-self.bit_len // self.b):
            raise ValueError("word count does not match the bit length")

    @property
    def n_words(self) -> int:
        return int(self.words.size)

    @cached_property
    def words_u64(self) -> np.ndarray:
        return self.words.astype(np.uint64)

    def bits(self) -> str:
        return "".join(format(int(w), f"0{self.b}b") for w in self.words)[: self.bit_len]


def _word_dtype(b):
    return np.uint32 if b == 32 else np.uint64


def pack_bits(bits: np.ndarray, b: int) -> np.ndarray:
    """Pack a 0/1 array into MSB-first ``b``-bit words, zero padding the tail."""
    nbytes = b // 8
    raw = np.packbits(bits.astype(np.uint8))
    pad = (-raw.size) % nbytes
    if pad:
        raw = np.concatenate([raw, np.zeros(pad, dtype=np.uint8)])
    return np.frombuffer(raw.tobytes(), dtype=f">u{nbytes}").astype(_word_dtype(b))


def encode(values, code: HuffmanCode, b: int = 32) -> BitStream:
    """Concatenate the codewords of ``values`` into a word-packed stream."""
    check_word_bits(b)
    idx = code.index_of(values)
    lens = code.lengths[idx]
    cws = code.codes[idx]
    ends = np.cumsum(lens)
    total = int(ends[-1]) if ends.size else 0
    bits = np.zeros(total, dtype=np.uint8)
    starts = ends - lens
    for j in range(code.max_len):
        sel = lens > j
        if not np.any(sel):
            break
        shift = (lens[sel] - 1 - j).astype(np.uint64)
        bits[starts[sel] + j] = ((cws[sel] >> shift) & np.uint64(1)).astype(np.uint8)
    return BitStream(pack_bits(bits, b), total, b)


def decode(stream: BitStream, code: HuffmanCode, n_symbols: int | None = None) -> np.ndarray:
    """Decode the whole stream. With ``n_symbols`` the count is enforced."""
    cap = n_symbols if n_symbols is not None else stream.bit_len
    out = np.empty(cap, dtype=np.int64)
    n_dec, status, bit = _jit.decode_indices(
        stream.words_u64, stream.b, stream.bit_len, code.first, code.count, code.offset, code.max_len, out
    )
    if status == _jit.TOO_FEW and n_symbols is None:
        status = _jit.OK
    if status != _jit.OK:
        raise CorruptStreamError(_jit.STATUS_MESSAGES[status], bit)
    return code.canonical_symbols[out[:n_dec]]


@dataclass(frozen=True)
class DecodeCursor:
    """Position of the scanner: current word, offset in it, pending bits."""

    word: int = 0
    oset: int = 0
    rem: int = 0
    rem_len: int = 0

    def pos(self, b: int) -> int:
        return self.word * b + self.oset


def ncw_word(S: int, b: int, limit: int, rem: int, rem_len: int, oset: int, code: HuffmanCode):
    """Scan one word from ``oset`` for the next codeword.

    Returns ``(symbol, rem, rem_len, oset)``. ``symbol`` is ``None`` when
    the word ran out first; the pending bits then stay in ``rem`` and the
    caller continues with the next word.
    """
    while oset < limit:
        rem = (rem << 1) | ((S >> (b - 1 - oset)) & 1)
        rem_len += 1
        oset += 1
        c = int(code.count[rem_len])
        f = int(code.first[rem_len])
        if c and f <= rem < f + c:
            return code.canonical_symbols[code.offset[rem_len] + rem - f], 0, 0, oset
        if rem_len >= code.max_len:
            raise CorruptStreamError(_jit.STATUS_MESSAGES[_jit.BAD_CODEWORD])
    return None, rem, rem_len, oset


def ncw(stream: BitStream, cursor: DecodeCursor, code: HuffmanCode):
    """Next codeword from ``cursor``; ``(None, cursor)`` at end of stream.

    Codewords may straddle word boundaries. Padding after ``bit_len`` is
    never read.
    """
    b = stream.b
    word, oset, rem, rem_len = cursor.word, cursor.oset, cursor.rem, cursor.rem_len
    while True:
        if word * b + oset >= stream.bit_len:
            if rem_len:
                raise CorruptStreamError(_jit.STATUS_MESSAGES[_jit.TRUNCATED], stream.bit_len)
            return None, DecodeCursor(word, oset)
        limit = min(b, stream.bit_len - word * b)
        try:
            sym, rem, rem_len, oset = ncw_word(int(stream.words[word]), b, limit, rem, rem_len, oset, code)
        except CorruptStreamError as exc:
            raise CorruptStreamError(str(exc), word * b + oset) from None
        if oset == b:
            word, oset = word + 1, 0
        if sym is not None:
            return sym, DecodeCursor(word, oset)


def dict_bits(code: HuffmanCode, b: int = 32) -> int:
    """Dictionary accounting used by the size bounds: 3b bits per entry per direction."""
    return 6 * code.k * b


def pack_dictionary(code: HuffmanCode) -> bytes:
    """``k`` (u32) then ``k`` pairs of (float32 symbol, u8 length), canonical order."""
    parts = [struct.pack("<I", code.k)]
    syms = code.canonical_symbols.astype("<f4")
    lens = code.lengths[code.canonical_order]
    for s, L in zip(syms, lens):
        parts.append(s.tobytes() + struct.pack("<B", int(L)))
    return b"".join(parts)


def unpack_dictionary(buf, offset: int = 0) -> tuple[np.ndarray, np.ndarray, int]:
    """Inverse of :func:`pack_dictionary`; returns ``(symbols, lengths, new_offset)``."""
    (k,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    if offset + 5 * k > len(buf):
        raise ValueError("dictionary runs past the end of the buffer")
    rec = np.frombuffer(bytes(buf[offset : offset + 5 * k]), dtype=[("s", "<f4"), ("L", "u1")])
    offset += 5 * k
    syms = rec["s"].astype(STORAGE_DTYPE)
    lens = rec["L"].astype(np.int64)
    order = np.argsort(syms, kind="stable")
    return syms[order], lens[order], offset
