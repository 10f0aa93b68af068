"""Vector-matrix products ``x^T W`` evaluated on compressed matrices.

Every kernel accumulates in float64 and walks each column in row order, so
the result for a given left operand row never depends on how a batch is
split across workers. ``pardot`` splits the rows of the left operand into
``ceil(r/q)``-sized chunks and runs them on threads (the compiled loops
release the GIL).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _jit
from .core import check_matrix, check_vectors
from .formats import CscMatrix, HamMatrix, IndexMapMatrix, ShamMatrix
from .huffman import CorruptStreamError, DecodeCursor, ncw


@dataclass
class DotResult:
    out: np.ndarray
    decoded: int
    elapsed_ns: int | None = None


def _raise(status, what="stream"):
    if status == _jit.BAD_INDEX:
        raise ValueError(_jit.STATUS_MESSAGES[status])
    raise CorruptStreamError(f"corrupt {what}: {_jit.STATUS_MESSAGES[status]}")


def _as_batch(x, n):
    x_arr = np.asarray(x)
    return check_vectors(x_arr, n), x_arr.ndim == 1


def dot_dense(x, W) -> np.ndarray:
    """Reference ``x^T W`` on the dense matrix, float64 accumulation."""
    W = check_matrix(W)
    X, single = _as_batch(x, W.shape[0])
    out = X @ W.astype(np.float64)
    return out[0] if single else out


def _ham_rows(H: HamMatrix, X, out):
    c = H.code
    st = _jit.ham_dot_rows(
        H.stream.words_u64, H.b, H.stream.bit_len, c.first, c.count, c.offset, c.max_len,
        c.canonical_values, H.n, H.m, X, out,
    )
    if st != _jit.OK:
        _raise(st)
    return X.shape[0] * H.n * H.m


def _sham_rows(S: ShamMatrix, X, out):
    if S.code is None:
        out[:] = 0.0
        return 0
    c = S.code
    st, decoded = _jit.sham_dot_rows(
        S.stream.words_u64, S.b, S.stream.bit_len, c.first, c.count, c.offset, c.max_len,
        c.canonical_values, S.ri, S.cb, S.n, S.m, X, out,
    )
    if st != _jit.OK:
        _raise(st)
    return decoded


def _csc_rows(C: CscMatrix, X, out):
    st = _jit.csc_dot_rows(C.nz, C.ri, C.cb, C.n, C.m, X, out)
    if st != _jit.OK:
        _raise(st, "csc matrix")
    return C.q * X.shape[0]


def _imap_rows(I: IndexMapMatrix, X, out):
    st = _jit.index_map_dot_rows(I.indices, I.centers.astype(np.float64), I.n, I.m, X, out)
    if st != _jit.OK:
        _raise(st, "index map")
    return I.n * I.m * X.shape[0]


_ROWS = {"ham": _ham_rows, "sham": _sham_rows, "csc": _csc_rows, "imap": _imap_rows}


def _run(x, M, fmt):
    if M.format != fmt:
        raise TypeError(f"expected a {fmt} matrix, got {M.format}")
    X, single = _as_batch(x, M.n)
    out = np.zeros((X.shape[0], M.m))
    decoded = _ROWS[fmt](M, X, out)
    return (out[0] if single else out), decoded


def dot_ham(x, H: HamMatrix, engine: str = "jit") -> np.ndarray:
    """``x^T W`` streamed from the address map, one weight at a time.

    ``engine="python"`` runs the same loop through :func:`sham.huffman.ncw`
    word by word; it is slow and meant for cross-checking.
    """
    if engine == "python":
        return _dot_ham_python(np.asarray(x, dtype=np.float64), H)
    return _run(x, H, "ham")[0]


def dot_sham(x, S: ShamMatrix, engine: str = "jit") -> np.ndarray:
    if engine == "python":
        return _dot_sham_python(np.asarray(x, dtype=np.float64), S)
    return _run(x, S, "sham")[0]


def dot_csc(x, C: CscMatrix) -> np.ndarray:
    return _run(x, C, "csc")[0]


def dot_index_map(x, I: IndexMapMatrix) -> np.ndarray:
    return _run(x, I, "imap")[0]


def dot(x, M) -> np.ndarray:
    """Dispatch on the representation; dense arrays go to :func:`dot_dense`."""
    if isinstance(M, np.ndarray):
        return dot_dense(x, M)
    return _run(x, M, M.format)[0]


def dot_with_stats(x, M) -> DotResult:
    """Product plus the number of decoded weights and the wall time."""
    t0 = time.perf_counter_ns()
    out, decoded = _run(x, M, M.format)
    return DotResult(out, decoded, time.perf_counter_ns() - t0)


def chunk_bounds(r: int, q: int) -> list[tuple[int, int]]:
    """Half-open row ranges of size ``ceil(r/q)`` (the last may be shorter)."""
    q = max(1, min(q, r))
    size = -(-r // q)
    return [(start, min(start + size, r)) for start in range(0, r, size)]


def pardot(X, M, q: int = 1) -> np.ndarray:
    """``X W`` for a batch of left operands, rows split across ``q`` threads.

    Each row is computed exactly as the sequential kernel would, so the
    output is bit-identical for every ``q``. ``q`` is clamped to ``r``.
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    if isinstance(M, np.ndarray):
        return np.atleast_2d(dot_dense(X, M))
    X = check_vectors(X, M.n)
    out = np.zeros((X.shape[0], M.m))
    rows = _ROWS[M.format]
    chunks = chunk_bounds(X.shape[0], q)
    if len(chunks) == 1:
        rows(M, X, out)
        return out
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        futures = [pool.submit(rows, M, X[a:b], out[a:b]) for a, b in chunks]
        for f in futures:
            f.result()
    return out


# Word-by-word reference loops built on the NCW scanner.


def _dot_ham_python(x, H):
    if x.shape != (H.n,):
        raise ValueError("dimension mismatch")
    out = np.zeros(H.m)
    row = col = 0
    acc = 0.0
    cursor = DecodeCursor()
    while True:
        z, cursor = ncw(H.stream, cursor, H.code)
        if z is None:
            break
        if col == H.m:
            raise CorruptStreamError("corrupt stream: " + _jit.STATUS_MESSAGES[_jit.TOO_MANY])
        acc += x[row] * float(z)
        row += 1
        if row == H.n:
            out[col] = acc
            row, col, acc = 0, col + 1, 0.0
    if col != H.m:
        raise CorruptStreamError("corrupt stream: " + _jit.STATUS_MESSAGES[_jit.TOO_FEW])
    return out


def _dot_sham_python(x, S):
    if x.shape != (S.n,):
        raise ValueError("dimension mismatch")
    out = np.zeros(S.m)
    if S.code is None:
        return out
    pos = col = 0
    acc = 0.0
    cursor = DecodeCursor()
    cb = S.cb
    while True:
        z, cursor = ncw(S.stream, cursor, S.code)
        if z is None:
            break
        while col < S.m and cb[col + 1] == pos:
            col += 1
        acc += x[S.ri[pos]] * float(z)
        pos += 1
        if cb[col + 1] == pos:
            out[col] = acc
            acc, col = 0.0, col + 1
    if pos != S.q:
        raise CorruptStreamError("corrupt stream: " + _jit.STATUS_MESSAGES[_jit.TOO_FEW])
    return out
