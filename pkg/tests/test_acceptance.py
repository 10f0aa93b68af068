"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""

import time
import warnings
from fractions import Fraction

import numpy as np
import pytest

from _corpus import GOLDEN, corpus
from sham import container
from sham.bench import SweepSpec, run_sweep, synthetic_matrix
from sham.formats import (
    K_DISTINCT,
    WORST_CASE,
    bound_bits,
    compress,
    crossover_s,
    space_report,
    to_csc,
    to_ham,
    to_sham,
)
from sham.huffman import SymbolTable, build_code
from sham.kernels import dot, dot_dense, pardot
from sham.quantization import CWSQuantizer, ECSQQuantizer, MagnitudePruner, PWSQuantizer

FORMATS = ("ham", "sham", "csc", "imap")



@pytest.fixture(scope="module")
def cases():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return corpus()


def _bits_equal(a, b):
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def test_c1_csc_golden_vector(record):
    t0 = time.perf_counter()
    nz, ri, cb = to_csc(GOLDEN).one_based()
    ok = (
        list(nz) == [1, 2, 10, 3, 4, 5, 6]
        and list(ri) == [1, 3, 2, 3, 1, 3, 5]
        and list(cb) == [1, 3, 5, 6, 6, 8]
    )
    elapsed = time.perf_counter() - t0
    ok = record("1 CSC golden vector", ok and elapsed < 1.0, f"{elapsed:.3f}s")
    assert ok


def test_c2_lossless_round_trip(cases, record):
    t0 = time.perf_counter()
    failures = []
    for case in cases:
        for fmt in FORMATS:
            C = compress(case.W, fmt, 32, case.codebook)
            if not _bits_equal(C.to_dense(), case.W):
                failures.append((case.index, fmt, "memory"))
            elif not _bits_equal(container.loads(container.dumps(C)).to_dense(), case.W):
                failures.append((case.index, fmt, "container"))
    elapsed = time.perf_counter() - t0
    ok = record(
        "2 lossless round-trip",
        not failures and elapsed < 120,
        f"{len(cases)} matrices x {len(FORMATS)} formats, {len(failures)} failures, {elapsed:.1f}s",
    )
    assert ok, failures[:10]


def _zipf_matrix(n=512, m=512, k=32, exponent=1.0, seed=7):
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.05, 1.0, size=k) * rng.choice([-1.0, 1.0], size=k)
    p = 1.0 / np.arange(1, k + 1) ** exponent
    return rng.choice(values, size=(n, m), p=p / p.sum()).astype(np.float32)


def test_c3_bound_satisfaction(cases, record):
    t0 = time.perf_counter()
    violations = []
    for case in cases:
        for C in (to_ham(case.W), to_sham(case.W)):
            rep = space_report(C)
            if not rep.within_bound:
                violations.append((case.index, rep.format, rep.actual_bits, rep.bound_bits))
    W = _zipf_matrix()
    ham, sham = space_report(to_ham(W)), space_report(to_sham(W))
    ham_ratio = ham.actual_bits / ham.bound_bits
    sham_ratio = sham.actual_bits / sham.bound_bits
    elapsed = time.perf_counter() - t0
    ok = (
        not violations
        and ham.hypothesis == K_DISTINCT
        and ham.k == 32
        and ham_ratio <= 0.9
        and sham.actual_bits < sham.bound_bits
        and elapsed < 60
    )
    ok = record(
        "3 bound satisfaction",
        ok,
        f"{len(violations)} violations; Zipf 512x512 k=32 HAM ratio {ham_ratio:.3f}, "
        f"sHAM ratio {sham_ratio:.3f}, {elapsed:.1f}s",
    )
    assert ok, violations[:10]


def test_c4_kernel_oracle_equivalence(cases, record):
    t0 = time.perf_counter()
    failures = []
    rng = np.random.default_rng(4)
    for case in cases:
        x = rng.standard_normal(case.W.shape[0])
        want = dot_dense(x, case.W)
        for fmt in FORMATS:
            got = dot(x, compress(case.W, fmt, 32, case.codebook))
            if not np.allclose(got, want, rtol=1e-5, atol=1e-12):
                failures.append((case.index, fmt))
    mats = {fmt: compress(GOLDEN, fmt) for fmt in FORMATS}
    for _ in range(100):
        x = rng.standard_normal(5)
        want = dot_dense(x, GOLDEN)
        for fmt, M in mats.items():
            if not np.allclose(dot(x, M), want, rtol=1e-5, atol=1e-12):
                failures.append(("golden", fmt))
    elapsed = time.perf_counter() - t0
    ok = record(
        "4 kernel oracle equivalence",
        not failures and elapsed < 120,
        f"{len(failures)} failures, {elapsed:.1f}s",
    )
    assert ok, failures[:10]


def test_c5_parallel_determinism(record):
    t0 = time.perf_counter()
    W = MagnitudePruner(p=90).fit_transform(synthetic_matrix(512, 512, seed=5))
    W = CWSQuantizer(k=32, ignore_zeros=True, seed=5).fit_transform(W)
    S = to_sham(W)
    X = np.random.default_rng(5).standard_normal((1000, 512))
    outs = {q: pardot(X, S, q) for q in (1, 2, 3, 8)}
    same = all(outs[q].tobytes() == outs[1].tobytes() for q in outs)
    elapsed = time.perf_counter() - t0
    ok = record("5 parallel determinism", same and elapsed < 30, f"q in 1,2,3,8, {elapsed:.1f}s")
    assert ok


def _prefix_free(words):
    words = sorted(words)
    return all(not b.startswith(a) for a, b in zip(words, words[1:]))


def test_c6_huffman_sandwich(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    bad = []
    for i in range(500):
        k = int(rng.integers(2, 300))
        counts = rng.integers(1, 10_000, size=k) if i % 2 else np.maximum(1, rng.zipf(1.5, size=k))
        code = build_code(SymbolTable(np.arange(k, dtype=np.float32), counts))
        H, L = code.entropy, code.avg_len
        kraft = sum(Fraction(1, 2 ** int(length)) for length in code.lengths)
        words = [code.codeword(s) for s in code.symbols]
        if not (H - 1e-12 <= L <= H + 1 + 1e-12 and kraft == 1 and _prefix_free(words)):
            bad.append(i)
    equal = build_code(SymbolTable(np.arange(4, dtype=np.float32), np.full(4, 5)))
    elapsed = time.perf_counter() - t0
    ok = record(
        "6 Huffman sandwich",
        not bad and equal.avg_len == 2.0 and elapsed < 30,
        f"{len(bad)} bad sources, equal 4-symbol avg_len {equal.avg_len}, {elapsed:.1f}s",
    )
    assert ok, bad[:10]


def test_c7_pws_unbiased(record):
    t0 = time.perf_counter()
    W = np.random.default_rng(7).uniform(-1, 1, size=(64, 64)).astype(np.float32)
    w = W.astype(np.float64)
    details, ok = [], True
    for k in (2, 8):
        edges = np.quantile(w.ravel(), np.linspace(0, 1, k + 1))
        idx = np.clip(np.searchsorted(edges, w, side="right") - 1, 0, k - 1)
        lo, hi = edges[idx], edges[idx + 1]
        runs = 200
        mean = np.mean(
            [PWSQuantizer(k=k, seed=s).fit_transform(W).astype(np.float64) for s in range(runs)], axis=0
        )
        # Two-point distribution on {lo, hi} with mean w.
        se = np.sqrt(np.maximum((hi - w) * (w - lo), 0.0) / runs)
        within = np.abs(mean - w) <= 3 * se + 1e-6
        frac = within.mean()
        details.append(f"k={k} {100 * frac:.2f}%")
        ok &= frac >= 0.99
    elapsed = time.perf_counter() - t0
    ok = record("7 PWS unbiasedness", ok and elapsed < 60, ", ".join(details) + f", {elapsed:.1f}s")
    assert ok


def test_c8_ecsq_monotone_and_lambda_zero(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    non_monotone, mismatched = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i in range(100):
            n, m = (int(x) for x in rng.integers(8, 65, size=2))
            W = rng.standard_normal((n, m)).astype(np.float32)
            k = int(rng.integers(2, 33))
            lam = float(rng.uniform(0.0, 0.5))
            est = ECSQQuantizer(lam=lam, k_target=k, seed=i).fit(W)
            if np.any(np.diff(est.cost_history_) > 0):
                non_monotone.append(i)
            zero = ECSQQuantizer(lam=0.0, k_target=k, seed=i, tol=1e-300).fit_transform(W)
            cws = CWSQuantizer(k=k, seed=i, tol=1e-300).fit_transform(W)
            if not _bits_equal(zero, cws):
                mismatched.append(i)
    elapsed = time.perf_counter() - t0
    ok = record(
        "8 ECSQ monotone cost, lambda=0 equals CWS",
        not non_monotone and not mismatched and elapsed < 60,
        f"{len(non_monotone)} non-monotone, {len(mismatched)} mismatches, {elapsed:.1f}s",
    )
    assert ok


def test_c9_sweep_ordering(record):
    t0 = time.perf_counter()
    ps = [60.0, 70.0, 80.0, 90.0, 95.0, 99.0]
    spec = SweepSpec(sizes=[(512, 4096)], seed=0, p=ps, k=[32], methods=["cws"], time=False)
    report = run_sweep(spec)
    bits = {(r["p"], r["format"]): r["actual_bits"] for r in report.rows}
    errors = [r["error"] for r in report.rows if r["error"]]
    sham = [bits[p, "sham"] for p in ps]
    checks = {
        "a": all(x > y for x, y in zip(sham, sham[1:])),
        "b": bits[99.0, "sham"] < bits[99.0, "csc"] < bits[99.0, "imap"],
        "c": all(bits[p, "imap"] < bits[p, "csc"] for p in ps if p <= 70),
        "d": all(bits[p, "ham"] < bits[p, "imap"] for p in ps),
    }
    ham_ratio = 32 * 512 * 4096 / bits[90.0, "ham"]
    checks["band"] = 10 <= ham_ratio <= 80
    elapsed = time.perf_counter() - t0
    ok = record(
        "9 sweep ordering",
        not errors and all(checks.values()) and elapsed < 300,
        " ".join(f"{key}={'ok' if v else 'no'}" for key, v in checks.items())
        + f", HAM ratio at p=90 {ham_ratio:.1f}x, {elapsed:.1f}s",
    )
    assert ok, (checks, errors)


def test_c10_crossover_predicate(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    wrong = []
    for i in range(200):
        n, m = (int(x) for x in rng.integers(1, 5000, size=2))
        k = int(rng.integers(1, 1 << 16))
        b = int(rng.choice([32, 64]))
        c = crossover_s(k, b, n, m)
        for s in (rng.uniform(0, 1), c * (1 - 1e-9), c * (1 + 1e-9)):
            if not 0 < s <= 1:
                continue
            ham = bound_bits("ham", n, m, s, k, b, K_DISTINCT) / (b * n * m)
            sham = bound_bits("sham", n, m, s, k, b, K_DISTINCT) / (b * n * m)
            if (sham < ham) != (s < c):
                wrong.append((i, n, m, k, b, s))
    elapsed = time.perf_counter() - t0
    ok = record("10 crossover predicate", not wrong and elapsed < 10, f"{len(wrong)} disagreements, {elapsed:.2f}s")
    assert ok, wrong[:10]


def test_worst_case_bound_is_looser():
    # Sanity link between the two hypotheses used above.
    assert bound_bits("ham", 64, 64, 1.0, 32, 32, K_DISTINCT) < bound_bits("ham", 64, 64, 1.0, 32, 32, WORST_CASE)
