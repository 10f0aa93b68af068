import json

import numpy as np
import pytest

from sham.bench import COLUMNS, SweepSpec, median_ns, parse_sweep_spec, run_sweep, synthetic_matrix


def test_parse_spec():
    spec = parse_sweep_spec(
        "# grid\nsizes = 512x4096, 8x9\np = 60, 99  # comment\nk = 32,256\nmethods = CWS\n"
        "formats = ham\nword_bits = 64\nthreads = 8\ntime = false\n"
    )
    assert spec.sizes == [(512, 4096), (8, 9)]
    assert spec.p == [60.0, 99.0] and spec.k == [32, 256]
    assert spec.methods == ["cws"] and spec.formats == ["ham"]
    assert (spec.word_bits, spec.threads, spec.time) == (64, 8, False)


@pytest.mark.parametrize("text", ["nonsense", "p = a", "formats = coo", "word_bits = 16", "repeats = 0"])
def test_parse_spec_errors(text):
    with pytest.raises(ValueError):
        parse_sweep_spec(text)


def test_median_ns():
    calls = []
    assert median_ns(lambda: calls.append(1), repeats=3, warmup=2) >= 0
    assert len(calls) == 5


def test_synthetic_matrix_range_and_seed():
    W = synthetic_matrix(20, 30, 4)
    assert W.dtype == np.float32 and W.min() >= -1 and W.max() <= 1
    assert W.tobytes() == synthetic_matrix(20, 30, 4).tobytes()


def test_sweep_properties():
    spec = SweepSpec(sizes=[(128, 512)], p=[60, 70, 80, 90, 95, 99], k=[32, 256], time=False)
    report = run_sweep(spec)
    assert len(report.rows) == 6 * 2 * 4
    for row in report.rows:
        assert row["error"] is None
        assert row["psi_actual"] == pytest.approx(row["actual_bits"] / (32 * 128 * 512))
        if row["bound_bits"] is not None:
            assert row["actual_bits"] <= row["bound_bits"]
    for k in (32, 256):
        for fmt in ("ham", "sham"):
            bits = [r["actual_bits"] for r in report.select(k=k, format=fmt)]
            assert all(a >= b for a, b in zip(bits, bits[1:]))
        imap = {r["actual_bits"] for r in report.select(k=k, format="imap")}
        assert len(imap) == 1
    p99 = {r["format"]: r["psi_actual"] for r in report.select(k=32, p=99)}
    assert p99["sham"] < p99["csc"] < p99["imap"]


def test_sweep_records_cell_errors():
    spec = SweepSpec(sizes=[(8, 8)], p=[99], k=[32], methods=["cws"], formats=["ham"], time=False)
    row = run_sweep(spec).rows[0]
    assert "insufficient distinct values" in row["error"]


def test_report_outputs():
    spec = SweepSpec(sizes=[(16, 16)], p=[0], k=[4], formats=["csc"], repeats=1, vectors=2)
    report = run_sweep(spec)
    assert report.to_csv().splitlines()[0] == ",".join(COLUMNS)
    data = json.loads(report.to_json())
    assert data["rows"][0]["dot_ns_median"] > 0


def test_empty_grid():
    assert run_sweep(SweepSpec(p=[])).rows == []
