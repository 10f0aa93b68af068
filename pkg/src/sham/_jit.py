"""Compiled inner loops: Huffman stream decoding and compressed dot products.

Streams are arrays of ``b``-bit words (held as uint64), MSB first. Codes
are canonical: a prefix ``rem`` of length ``L`` is a codeword iff
``first[L] <= rem < first[L] + count[L]``, and its symbol sits at
``offset[L] + rem - first[L]`` in canonical order.

Every routine returns a status code instead of raising so it can run with
the GIL released; see ``STATUS_MESSAGES``.
"""

import numpy as np
from numba import njit

OK = 0
BAD_CODEWORD = 1
TRUNCATED = 2
TOO_MANY = 3
TOO_FEW = 4
BAD_INDEX = 5

STATUS_MESSAGES = {
    BAD_CODEWORD: "bit sequence matches no codeword",
    TRUNCATED: "stream ends inside a codeword",
    TOO_MANY: "stream holds more symbols than the matrix",
    TOO_FEW: "stream holds fewer symbols than the matrix",
    BAD_INDEX: "row index or column boundary out of range",
}

_ONE = np.uint64(1)


@njit(nogil=True, cache=True)
def decode_indices(words, b, bit_len, first, count, offset, max_len, out):
    """Decode into canonical symbol indices. Returns (n_decoded, status, bit)."""
    n_out = out.shape[0]
    pos = 0
    rem = np.uint64(0)
    rem_len = 0
    n_dec = 0
    for i in range(words.shape[0]):
        S = words[i]
        limit = min(b, bit_len - i * b)
        for oset in range(limit):
            bit = (S >> np.uint64(b - 1 - oset)) & _ONE
            rem = (rem << _ONE) | bit
            rem_len += 1
            pos += 1
            c = count[rem_len]
            if c > 0 and rem >= first[rem_len] and rem - first[rem_len] < np.uint64(c):
                if n_dec == n_out:
                    return n_dec, TOO_MANY, pos
                out[n_dec] = offset[rem_len] + np.int64(rem - first[rem_len])
                n_dec += 1
                rem = np.uint64(0)
                rem_len = 0
            elif rem_len >= max_len:
                return n_dec, BAD_CODEWORD, pos
    if rem_len > 0:
        return n_dec, TRUNCATED, pos
    if n_dec < n_out:
        return n_dec, TOO_FEW, pos
    return n_dec, OK, pos


@njit(nogil=True, cache=True)
def _ham_dot_one(words, b, bit_len, first, count, offset, max_len, values, n, m, x, out):
    # Streams the address map once: row/col/sum state, one weight at a time.
    row = 0
    col = 0
    acc = 0.0
    rem = np.uint64(0)
    rem_len = 0
    for i in range(words.shape[0]):
        S = words[i]
        limit = min(b, bit_len - i * b)
        for oset in range(limit):
            bit = (S >> np.uint64(b - 1 - oset)) & _ONE
            rem = (rem << _ONE) | bit
            rem_len += 1
            c = count[rem_len]
            if c > 0 and rem >= first[rem_len] and rem - first[rem_len] < np.uint64(c):
                if col == m:
                    return TOO_MANY
                acc += x[row] * values[offset[rem_len] + np.int64(rem - first[rem_len])]
                row += 1
                if row == n:
                    out[col] = acc
                    row = 0
                    col += 1
                    acc = 0.0
                rem = np.uint64(0)
                rem_len = 0
            elif rem_len >= max_len:
                return BAD_CODEWORD
    if rem_len > 0:
        return TRUNCATED
    if col < m:
        return TOO_FEW
    return OK


@njit(nogil=True, cache=True)
def ham_dot_rows(words, b, bit_len, first, count, offset, max_len, values, n, m, X, out):
    for r in range(X.shape[0]):
        st = _ham_dot_one(words, b, bit_len, first, count, offset, max_len, values, n, m, X[r], out[r])
        if st != OK:
            return st
    return OK


@njit(nogil=True, cache=True)
def _sham_dot_one(words, b, bit_len, first, count, offset, max_len, values, ri, cb, n, m, x, out):
    q = cb[m] - cb[0]
    pos = 0
    col = 0
    acc = 0.0
    rem = np.uint64(0)
    rem_len = 0
    for j in range(m):
        out[j] = 0.0
    for i in range(words.shape[0]):
        S = words[i]
        limit = min(b, bit_len - i * b)
        for oset in range(limit):
            bit = (S >> np.uint64(b - 1 - oset)) & _ONE
            rem = (rem << _ONE) | bit
            rem_len += 1
            c = count[rem_len]
            if c > 0 and rem >= first[rem_len] and rem - first[rem_len] < np.uint64(c):
                if pos == q:
                    return TOO_MANY, pos
                # skip empty columns
                while col < m and cb[col + 1] - cb[0] == pos:
                    out[col] = 0.0
                    col += 1
                r = ri[pos]
                if r < 0 or r >= n or col == m:
                    return BAD_INDEX, pos
                acc += x[r] * values[offset[rem_len] + np.int64(rem - first[rem_len])]
                pos += 1
                if cb[col + 1] - cb[0] == pos:
                    out[col] = acc
                    acc = 0.0
                    col += 1
                rem = np.uint64(0)
                rem_len = 0
            elif rem_len >= max_len:
                return BAD_CODEWORD, pos
    if rem_len > 0:
        return TRUNCATED, pos
    if pos < q:
        return TOO_FEW, pos
    return OK, pos


@njit(nogil=True, cache=True)
def sham_dot_rows(words, b, bit_len, first, count, offset, max_len, values, ri, cb, n, m, X, out):
    decoded = 0
    for r in range(X.shape[0]):
        st, pos = _sham_dot_one(words, b, bit_len, first, count, offset, max_len, values, ri, cb, n, m, X[r], out[r])
        decoded += pos
        if st != OK:
            return st, decoded
    return OK, decoded


@njit(nogil=True, cache=True)
def csc_dot_rows(nz, ri, cb, n, m, X, out):
    for r in range(X.shape[0]):
        x = X[r]
        for j in range(m):
            acc = 0.0
            for t in range(cb[j], cb[j + 1]):
                i = ri[t]
                if i < 0 or i >= n:
                    return BAD_INDEX
                acc += x[i] * np.float64(nz[t])
            out[r, j] = acc
    return OK


@njit(nogil=True, cache=True)
def index_map_dot_rows(indices, centers, n, m, X, out):
    # indices are stored column by column: entry (i, j) at j * n + i
    k = centers.shape[0]
    for r in range(X.shape[0]):
        x = X[r]
        for j in range(m):
            acc = 0.0
            base = j * n
            for i in range(n):
                t = np.int64(indices[base + i])
                if t >= k:
                    return BAD_INDEX
                acc += x[i] * centers[t]
            out[r, j] = acc
    return OK
