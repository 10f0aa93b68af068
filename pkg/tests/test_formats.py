import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from _corpus import GOLDEN
from sham.core import Rng
from sham.formats import (
    K_DISTINCT,
    WORST_CASE,
    IndexMapMatrix,
    bound_bits,
    choose_format,
    compress,
    crossover_s,
    from_csc,
    from_ham,
    from_index_map,
    from_sham,
    index_bits,
    space_report,
    to_csc,
    to_ham,
    to_index_map,
    to_sham,
)
from sham.quantization import prune, quantize_cws


FORMATS = ("ham", "sham", "csc", "imap")


def test_csc_golden():
    C = to_csc(GOLDEN)
    nz, ri, cb = C.one_based()
    assert nz.tolist() == [1, 2, 10, 3, 4, 5, 6]
    assert ri.tolist() == [1, 3, 2, 3, 1, 3, 5]
    assert cb.tolist() == [1, 3, 5, 6, 6, 8]
    assert np.array_equal(from_csc(C), GOLDEN)


def test_csc_all_zero_and_dense():
    C = to_csc(np.zeros((3, 4)))
    assert C.q == 0 and np.all(C.cb == C.cb[0])
    D = to_csc(np.ones((2, 2)))
    assert space_report(D).psi_actual == pytest.approx(11 / 4)


def test_ham_constant_matrix():
    H = to_ham(np.full((6, 7), 2.5))
    assert H.k == 1 and H.stream.bit_len == 42
    assert np.array_equal(from_ham(H), np.full((6, 7), 2.5, dtype=np.float32))


def test_sham_golden_matches_csc_structure():
    S = to_sham(GOLDEN)
    C = to_csc(GOLDEN)
    assert S.q == 7
    assert np.array_equal(S.ri, C.ri) and np.array_equal(S.cb, C.cb)
    assert np.array_equal(S.nz(), C.nz)
    assert np.array_equal(from_sham(S), GOLDEN)


def test_sham_all_zero():
    S = to_sham(np.zeros((4, 3)))
    assert S.code is None and S.stream.bit_len == 0
    assert np.all(S.cb == 0)
    assert not from_sham(S).any()


def _quantized(n, m, p, k, seed):
    W = np.random.default_rng(seed).standard_normal((n, m)).astype(np.float32)
    if p:
        W = prune(W, p)
    return quantize_cws(W, k, Rng(seed), ignore_zeros=bool(p))


def test_ham_k_distinct_bound_64x64():
    W, _ = _quantized(64, 64, 0, 32, 0)
    H = to_ham(W)
    assert H.accounted_bits <= 64 * 64 * (1 + math.log2(32)) + 6 * 32 * 32


def test_sham_k_distinct_bound_512x512():
    W, _ = _quantized(512, 512, 90, 32, 1)
    rep = space_report(to_sham(W))
    s, nm = rep.s, 512 * 512
    assert rep.hypothesis == K_DISTINCT
    assert rep.actual_bits <= s * nm * (1 + math.log2(32)) + 32 * (6 * 32 + s * nm + 512 + 1)


def test_index_map_accounting():
    I = IndexMapMatrix(4096, 4096, np.arange(256, dtype=np.float32), np.zeros(4096 * 4096, np.uint8), 32)
    assert space_report(I).psi_actual == pytest.approx(8 / 32 + 256 / 4096**2)
    W = np.array([[0.5, -0.5], [0.5, 0.5]], dtype=np.float32)
    assert to_index_map(W).index_bits == 8
    assert space_report(to_index_map(W)).psi_actual == pytest.approx((8 * 4 + 2 * 32) / (32 * 4))


def test_index_map_single_center_and_limits():
    I = to_index_map(np.full((3, 3), 7.0))
    assert not I.indices.any() and np.all(from_index_map(I) == 7.0)
    assert index_bits(256) == 8 and index_bits(257) == 16
    with pytest.raises(ValueError):
        index_bits(65537)


def test_index_map_with_pruned_codebook():
    W, cb = _quantized(30, 20, 50, 8, 3)
    I = to_index_map(W, cb)
    assert I.k == 9 and np.array_equal(I.to_dense(), W)


def test_bound_examples():
    nm = 4096 * 4096
    psi_ham = bound_bits("ham", 4096, 4096, 1.0, 32, 32) / (32 * nm)
    psi_sham = bound_bits("sham", 4096, 4096, 0.01, 32, 32) / (32 * nm)
    assert psi_ham == pytest.approx(0.18751, abs=1e-5)
    assert psi_sham == pytest.approx(0.01213, abs=1e-5)
    assert crossover_s(32, 32, 4096, 4096) == pytest.approx(0.15768, abs=1e-5)
    assert crossover_s(2, 32, 10**5, 10**5) == pytest.approx(0.0625 / 1.0625, abs=1e-4)
    assert crossover_s(1, 32, 1, 40) <= 0


def test_k_distinct_matches_worst_case_when_all_distinct():
    n, m, b = 8, 8, 32
    nm = n * m
    assert bound_bits("ham", n, m, 1.0, nm, b, K_DISTINCT) == pytest.approx(
        bound_bits("ham", n, m, 1.0, nm, b, WORST_CASE)
    )
    assert bound_bits("sham", n, m, 1.0, nm, b, K_DISTINCT) == pytest.approx(
        bound_bits("sham", n, m, 1.0, nm, b, WORST_CASE)
    )


def test_choose_format_follows_crossover():
    W, _ = _quantized(512, 4096, 90, 32, 0)
    assert choose_format(W) == "sham"
    W, _ = _quantized(64, 64, 0, 32, 0)
    assert choose_format(W) == "ham"


def test_unknown_format():
    with pytest.raises(ValueError):
        compress(GOLDEN, "coo")


def test_skewed_source_strictly_under_bound():
    rng = np.random.default_rng(0)
    W = rng.choice(np.arange(1, 9, dtype=np.float32), size=(40, 40), p=[0.5, 0.2, 0.1, 0.1, 0.04, 0.03, 0.02, 0.01])
    for C in (to_ham(W), to_sham(W)):
        rep = space_report(C)
        assert rep.actual_bits < rep.bound_bits


matrices = st.tuples(st.integers(1, 24), st.integers(1, 24), st.sampled_from([0, 50, 90, 99]), st.integers(0, 2**16))


@settings(max_examples=150, deadline=None)
@given(matrices, st.sampled_from([32, 64]))
def test_lossless_and_bounded(params, b):
    n, m, p, seed = params
    rng = np.random.default_rng(seed)
    W = rng.choice(rng.standard_normal(5).astype(np.float32), size=(n, m))
    if p:
        W = prune(W, p)
    for fmt in FORMATS:
        C = compress(W, fmt, b)
        assert C.to_dense().tobytes() == W.tobytes()
        rep = space_report(C)
        assert rep.psi_actual == pytest.approx(rep.actual_bits / (b * n * m))
        if fmt in ("ham", "sham"):
            assert rep.within_bound


@settings(max_examples=100, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 10), st.integers(1, 10)), elements=st.floats(-100, 100, width=32)))
def test_lossless_arbitrary_values(W):
    for fmt in FORMATS:
        out = compress(W, fmt).to_dense()
        assert out.tobytes() == (W + np.float32(0)).tobytes()
