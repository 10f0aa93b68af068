"""Compressed matrix representations and their size accounting.

* ``CscMatrix``: compressed sparse column (``nz``, ``ri``, ``cb``).
* ``HamMatrix``: Huffman address map, every entry (zeros included) coded
  in column order.
* ``ShamMatrix``: Huffman-coded ``nz`` plus uncompressed ``ri``/``cb``.
* ``IndexMapMatrix``: per-entry byte-rounded indices into a center vector.

Index vectors are 0-based internally; ``CscMatrix.one_based()`` gives the
1-based presentation. Each format reports two sizes: ``accounted_bits``
follows the bookkeeping of the size bounds (every ``ri``/``cb`` entry is
one ``b``-bit word, dictionaries cost ``3b`` bits per entry and direction,
the stream counts its exact bit length), ``stored_bits`` is what the
container file actually holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bitpack
from .core import STORAGE_DTYPE, check_matrix, check_word_bits, occupancy_ratio
from .huffman import BitStream, HuffmanCode, SymbolTable, build_code, decode, dict_bits, encode
from .quantization import SENTINEL, Codebook

FORMATS = ("ham", "sham", "csc", "imap")
WORST_CASE = "worst-case"
K_DISTINCT = "k-distinct"


def _csc_arrays(W: np.ndarray):
    n, m = W.shape
    Wt = W.T  # column-major enumeration
    rows_cols = np.nonzero(Wt)
    nz = Wt[rows_cols].astype(STORAGE_DTYPE)
    ri = rows_cols[1].astype(np.int64)
    cb = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows_cols[0], minlength=m), out=cb[1:])
    return nz, ri, cb


def _scatter_csc(n, m, nz, ri, cb) -> np.ndarray:
    W = np.zeros((n, m), dtype=STORAGE_DTYPE)
    cols = np.repeat(np.arange(m), np.diff(cb))
    W[ri, cols] = nz
    return W


def _check_csc_structure(n, m, ri, cb, q):
    if cb.size != m + 1 or cb[0] != 0 or np.any(np.diff(cb) < 0) or cb[-1] != q:
        raise ValueError("inconsistent column boundaries")
    if ri.size != q or (q and (ri.min() < 0 or ri.max() >= n)):
        raise ValueError("row index out of range")


@dataclass(frozen=True, eq=False)
class CscMatrix:
    n: int
    m: int
    nz: np.ndarray
    ri: np.ndarray
    cb: np.ndarray
    b: int = 32
    format = "csc"

    def __post_init__(self):
        _check_csc_structure(self.n, self.m, self.ri, self.cb, self.nz.size)

    @property
    def q(self) -> int:
        return int(self.nz.size)

    @property
    def shape(self):
        return (self.n, self.m)

    def one_based(self):
        return self.nz, self.ri + 1, self.cb + 1

    def to_dense(self) -> np.ndarray:
        return _scatter_csc(self.n, self.m, self.nz, self.ri, self.cb)

    @property
    def accounted_bits(self) -> int:
        return (2 * self.q + self.m + 1) * self.b

    @property
    def stored_bits(self) -> int:
        return 32 * self.q + bitpack.width_for(self.n) * self.q + self.b * (self.m + 1)

    @property
    def k(self) -> int:
        return int(np.unique(self.nz).size)


@dataclass(frozen=True, eq=False)
class HamMatrix:
    n: int
    m: int
    stream: BitStream
    code: HuffmanCode
    format = "ham"

    @property
    def b(self) -> int:
        return self.stream.b

    @property
    def shape(self):
        return (self.n, self.m)

    @property
    def k(self) -> int:
        return self.code.k

    def to_dense(self) -> np.ndarray:
        seq = decode(self.stream, self.code, self.n * self.m)
        return seq.reshape(self.m, self.n).T.copy()

    @property
    def accounted_bits(self) -> int:
        return self.stream.bit_len + dict_bits(self.code, self.b)

    @property
    def stored_bits(self) -> int:
        return self.stream.n_words * self.b + 8 * (4 + 5 * self.code.k)


@dataclass(frozen=True, eq=False)
class ShamMatrix:
    n: int
    m: int
    stream: BitStream
    code: HuffmanCode | None
    ri: np.ndarray
    cb: np.ndarray
    format = "sham"

    def __post_init__(self):
        _check_csc_structure(self.n, self.m, self.ri, self.cb, self.ri.size)
        if self.code is None and self.ri.size:
            raise ValueError("non-empty sHAM matrix needs a code")

    @property
    def b(self) -> int:
        return self.stream.b

    @property
    def q(self) -> int:
        return int(self.ri.size)

    @property
    def shape(self):
        return (self.n, self.m)

    @property
    def k(self) -> int:
        return 0 if self.code is None else self.code.k

    def nz(self) -> np.ndarray:
        if self.code is None:
            return np.zeros(0, dtype=STORAGE_DTYPE)
        return decode(self.stream, self.code, self.q)

    def to_dense(self) -> np.ndarray:
        return _scatter_csc(self.n, self.m, self.nz(), self.ri, self.cb)

    @property
    def accounted_bits(self) -> int:
        dict_part = 6 * self.k * self.b
        return self.stream.bit_len + dict_part + self.b * (self.q + self.m + 1)

    @property
    def stored_bits(self) -> int:
        return (
            self.stream.n_words * self.b
            + 8 * (4 + 5 * self.k)
            + bitpack.width_for(self.n) * self.q
            + self.b * (self.m + 1)
        )


def index_bits(k: int) -> int:
    """Byte-rounded index width: 8 bits up to 256 centers, else 16."""
    if k > 2**16:
        raise ValueError(f"index map supports at most 65536 centers, got {k}")
    return 8 if k <= 256 else 16


@dataclass(frozen=True, eq=False)
class IndexMapMatrix:
    n: int
    m: int
    centers: np.ndarray
    indices: np.ndarray  # column order, length n*m
    b: int = 32
    format = "imap"

    def __post_init__(self):
        if self.indices.size != self.n * self.m:
            raise ValueError("index map has the wrong length")
        if self.indices.size and int(self.indices.max()) >= self.centers.size:
            raise ValueError("index out of range")

    @property
    def k(self) -> int:
        return int(self.centers.size)

    @property
    def shape(self):
        return (self.n, self.m)

    @property
    def index_bits(self) -> int:
        return index_bits(self.k)

    def to_dense(self) -> np.ndarray:
        return self.centers[self.indices].reshape(self.m, self.n).T.copy()

    @property
    def accounted_bits(self) -> int:
        return self.index_bits * self.n * self.m + self.k * self.b

    @property
    def stored_bits(self) -> int:
        return self.index_bits * self.n * self.m + 32 * self.k


# Conversions


def to_csc(W, b: int = 32) -> CscMatrix:
    W = check_matrix(W)
    nz, ri, cb = _csc_arrays(W)
    return CscMatrix(W.shape[0], W.shape[1], nz, ri, cb, check_word_bits(b))


def from_csc(C: CscMatrix) -> np.ndarray:
    return C.to_dense()


def to_ham(W, b: int = 32) -> HamMatrix:
    W = check_matrix(W)
    seq = W.T.ravel()
    code = build_code(SymbolTable.from_values(seq))
    return HamMatrix(W.shape[0], W.shape[1], encode(seq, code, check_word_bits(b)), code)


def from_ham(H: HamMatrix) -> np.ndarray:
    return H.to_dense()


def to_sham(W, b: int = 32) -> ShamMatrix:
    W = check_matrix(W)
    check_word_bits(b)
    nz, ri, cb = _csc_arrays(W)
    if nz.size == 0:
        return ShamMatrix(W.shape[0], W.shape[1], BitStream(np.zeros(0, dtype=np.uint32 if b == 32 else np.uint64), 0, b), None, ri, cb)
    code = build_code(SymbolTable.from_values(nz))
    return ShamMatrix(W.shape[0], W.shape[1], encode(nz, code, b), code, ri, cb)


def from_sham(S: ShamMatrix) -> np.ndarray:
    return S.to_dense()


def to_index_map(W, codebook: Codebook | None = None, b: int = 32) -> IndexMapMatrix:
    """Index map of ``W``. Without a codebook the distinct values are used.

    Entries a codebook leaves unassigned (pruned zeros) map to a 0.0 center,
    appended if the codebook has none.
    """
    W = check_matrix(W)
    check_word_bits(b)
    n, m = W.shape
    if codebook is None:
        centers = np.unique(W)
        index_bits(centers.size)
        idx = np.searchsorted(centers, W)
    else:
        if codebook.shape != W.shape:
            raise ValueError("codebook shape does not match the matrix")
        if not np.array_equal(codebook.reconstruct(), W):
            raise ValueError("codebook does not reproduce the matrix")
        centers = codebook.centers.astype(STORAGE_DTYPE)
        idx = codebook.assignments.astype(np.int64)
        sentinel = idx == SENTINEL
        if np.any(sentinel):
            zero = np.flatnonzero(centers == 0)
            if zero.size:
                idx[sentinel] = zero[0]
            else:
                centers = np.append(centers, STORAGE_DTYPE(0.0))
                idx[sentinel] = centers.size - 1
        index_bits(centers.size)
    dtype = np.uint8 if centers.size <= 256 else np.uint16
    return IndexMapMatrix(n, m, centers, np.ascontiguousarray(idx.T).ravel().astype(dtype), b)


def from_index_map(I: IndexMapMatrix) -> np.ndarray:
    return I.to_dense()


def compress(W, fmt: str, b: int = 32, codebook: Codebook | None = None):
    fmt = fmt.lower()
    if fmt == "ham":
        return to_ham(W, b)
    if fmt == "sham":
        return to_sham(W, b)
    if fmt == "csc":
        return to_csc(W, b)
    if fmt == "imap":
        return to_index_map(W, codebook, b)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


# Bounds


def bound_bits(fmt: str, n: int, m: int, s: float, k: int, b: int = 32, hypothesis: str = K_DISTINCT) -> float:
    """Upper bound on the accounted size of a HAM or sHAM matrix, in bits.

    ``worst-case`` assumes no repeated entries; ``k-distinct`` assumes ``k``
    distinct values. Values are exact formula evaluations in float64.
    """
    nm = n * m
    if fmt == "ham":
        if hypothesis == WORST_CASE:
            return nm * (1 + math.log2(nm)) + 6 * nm * b
        return nm * (1 + math.log2(k)) + 6 * k * b
    if fmt == "sham":
        snm = s * nm
        if hypothesis == WORST_CASE:
            stream = snm * (1 + math.log2(snm)) if snm > 0 else 0.0
            return stream + b * (7 * snm + m + 1)
        return snm * (1 + math.log2(k)) + b * (6 * k + snm + m + 1)
    raise ValueError(f"no size bound for format {fmt!r}")


def crossover_s(k: int, b: int, n: int, m: int) -> float:
    """Non-zero ratio below which the sHAM bound beats the HAM bound."""
    a = (1 + math.log2(k)) / b
    return (a - (m + 1) / (n * m)) / (1 + a)


def choose_format(W, k: int | None = None, b: int = 32) -> str:
    """``sham`` when the non-zero ratio is under the bound crossover, else ``ham``."""
    W = check_matrix(W)
    n, m = W.shape
    if k is None:
        k = int(np.unique(W).size)
    s = np.count_nonzero(W) / (n * m)
    return "sham" if s < crossover_s(max(k, 1), b, n, m) else "ham"


@dataclass(frozen=True)
class SpaceReport:
    format: str
    n: int
    m: int
    s: float
    k: int
    b: int
    actual_bits: int
    stored_bits: int
    bound_bits: float | None
    hypothesis: str | None
    psi_actual: float
    psi_stored: float
    psi_bound: float | None

    @property
    def within_bound(self) -> bool | None:
        if self.bound_bits is None:
            return None
        return self.actual_bits <= math.ceil(self.bound_bits)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["within_bound"] = self.within_bound
        return d


def space_report(C) -> SpaceReport:
    n, m, b = C.n, C.m, C.b
    nm = n * m
    if C.format in ("sham", "csc"):
        q = C.q
    elif C.format == "ham" and C.code.counts is not None:
        zero = np.flatnonzero(C.code.symbols == 0)
        q = nm - (int(C.code.counts[zero[0]]) if zero.size else 0)
    else:
        q = int(np.count_nonzero(C.to_dense()))
    s = q / nm
    k = C.k
    bound = hyp = None
    if C.format in ("ham", "sham"):
        hyp = K_DISTINCT if k < nm else WORST_CASE
        bound = bound_bits(C.format, n, m, s, max(k, 1), b, hyp)
    return SpaceReport(
        format=C.format, n=n, m=m, s=s, k=k, b=b,
        actual_bits=int(C.accounted_bits), stored_bits=int(C.stored_bits),
        bound_bits=bound, hypothesis=hyp,
        psi_actual=occupancy_ratio(C.accounted_bits, n, m, b),
        psi_stored=occupancy_ratio(C.stored_bits, n, m, b),
        psi_bound=None if bound is None else occupancy_ratio(bound, n, m, b),
    )
