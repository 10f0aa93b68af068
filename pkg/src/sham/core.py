"""Shared types, input validation and sparsity arithmetic.

Matrices are plain 2-D numpy arrays. Weights are stored as float32 and
every product is accumulated in float64.

Random streams come from numpy's ``Philox`` bit generator (Philox-4x64-10,
counter based), so a seed gives the same stream on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.utils import check_array

STORAGE_DTYPE = np.float32
WORD_SIZES = (32, 64)


def check_matrix(W, *, name: str = "W") -> np.ndarray:
    """Validate a weight matrix and return it as C-ordered float32.

    Negative zeros are normalised to ``+0.0`` so that a value and its bit
    pattern identify the same Huffman symbol.
    """
    W = check_array(
        W,
        dtype=STORAGE_DTYPE,
        order="C",
        ensure_all_finite=True,
        input_name=name,
    )
    if W.shape[0] < 1 or W.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    return W + STORAGE_DTYPE(0.0)


def check_vectors(X, n: int, *, name: str = "X") -> np.ndarray:
    """Validate left operands: a length-``n`` vector or an ``r x n`` batch."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    X = check_array(X, dtype=np.float64, order="C", ensure_all_finite=True, input_name=name)
    if X.shape[1] != n:
        raise ValueError(f"dimension mismatch: {name} has {X.shape[1]} columns, matrix has {n} rows")
    return X


def check_word_bits(b: int) -> int:
    if b not in WORD_SIZES:
        raise ValueError(f"word size must be one of {WORD_SIZES}, got {b!r}")
    return int(b)


@dataclass(frozen=True)
class SparsityStats:
    q: int
    s: float
    k_distinct: int
    n: int
    m: int


def stats(W) -> SparsityStats:
    """Non-zero count, non-zero ratio and number of distinct values.

    Zero counts as a distinct value only when it occurs in ``W``.
    """
    W = check_matrix(W)
    n, m = W.shape
    q = int(np.count_nonzero(W))
    return SparsityStats(q=q, s=q / (n * m), k_distinct=int(np.unique(W).size), n=n, m=m)


def occupancy_ratio(compressed_bits: float, n: int, m: int, b: int = 32) -> float:
    """Compressed size over the ``b * n * m`` bits of the dense matrix."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    return compressed_bits / (b * n * m)


@dataclass(frozen=True)
class Rng:
    """Seeded source of reproducible random streams.

    Every call to :meth:`generator` restarts the stream, so two consumers
    built from equal seeds see identical draws.
    """

    seed: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(int(self.seed)))

    def spawn(self, i: int) -> "Rng":
        # Independent child stream derived from (seed, i).
        ss = np.random.SeedSequence([int(self.seed), int(i)])
        return Rng(int(ss.generate_state(1, dtype=np.uint64)[0]))


def as_generator(rng) -> np.random.Generator:
    """Accept an ``Rng``, an int seed, ``None`` or a ready ``Generator``."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, Rng):
        return rng.generator()
    return Rng(0 if rng is None else int(rng)).generator()
