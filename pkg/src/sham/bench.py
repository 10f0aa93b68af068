"""Size/time sweeps over pruning levels, quantizers and storage formats.

Sweep spec files are flat ``key = value`` text; ``#`` starts a comment and
list values are comma separated::

    sizes      = 512x4096          # n x m, one matrix per size
    seed       = 0
    p          = 60, 70, 80, 90, 95, 99
    k          = 32, 256
    methods    = cws               # cws | pws | uq | ecsq | none
    formats    = ham, sham, csc, imap
    word_bits  = 32
    threads    = 8
    vectors    = 8                 # left operands per timed product
    repeats    = 5                 # timed runs after one warm-up
    time       = true

Matrices are uniform in [-1, 1]. Any list left empty yields an empty report.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .core import Rng, check_word_bits
from .estimator import PipelineSpec, make_quantizer
from .formats import FORMATS, compress, space_report
from .kernels import pardot
from .quantization import MagnitudePruner

COLUMNS = (
    "n", "m", "p", "k", "method", "format", "actual_bits", "stored_bits", "bound_bits",
    "psi_actual", "psi_bound", "ratio", "size_kb", "dense_bits", "dot_ns_median",
    "dense_dot_ns_median", "threads", "error",
)


@dataclass
class SweepSpec:
    sizes: list = field(default_factory=lambda: [(512, 4096)])
    seed: int = 0
    p: list = field(default_factory=lambda: [60.0, 70.0, 80.0, 90.0, 95.0, 99.0])
    k: list = field(default_factory=lambda: [32])
    methods: list = field(default_factory=lambda: ["cws"])
    formats: list = field(default_factory=lambda: list(FORMATS))
    word_bits: int = 32
    threads: int = 1
    vectors: int = 8
    repeats: int = 5
    time: bool = True


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _size(token: str):
    n, _, m = token.lower().partition("x")
    return int(n), int(m)


_PARSERS = {
    "sizes": lambda v: [_size(t) for t in _split(v)],
    "seed": int,
    "p": lambda v: [float(t) for t in _split(v)],
    "k": lambda v: [int(t) for t in _split(v)],
    "methods": lambda v: [t.lower() for t in _split(v)],
    "formats": lambda v: [t.lower() for t in _split(v)],
    "word_bits": int,
    "threads": int,
    "vectors": int,
    "repeats": int,
    "time": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}


def parse_sweep_spec(text: str) -> SweepSpec:
    spec = SweepSpec()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep or key not in _PARSERS:
            raise ValueError(f"line {lineno}: expected 'key = value' with a known key, got {raw!r}")
        try:
            setattr(spec, key, _PARSERS[key](value))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    check_word_bits(spec.word_bits)
    if spec.repeats < 1 or spec.vectors < 1 or spec.threads < 1:
        raise ValueError("threads, vectors and repeats must be positive")
    for f in spec.formats:
        if f not in FORMATS:
            raise ValueError(f"unknown format {f!r}")
    return spec


def median_ns(fn, repeats: int = 5, warmup: int = 1) -> int:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return int(statistics.median(samples))


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({c: "" if row.get(c) is None else row.get(c) for c in COLUMNS})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"columns": list(COLUMNS), "rows": self.rows}, indent=2)

    def select(self, **where) -> list[dict]:
        return [r for r in self.rows if all(r.get(key) == val for key, val in where.items())]


def synthetic_matrix(n: int, m: int, seed: int = 0) -> np.ndarray:
    return Rng(seed).generator().uniform(-1.0, 1.0, size=(n, m)).astype(np.float32)


def run_sweep(spec: SweepSpec, log=None) -> BenchReport:
    """Run the whole grid; a failing cell is recorded in its row's ``error``."""
    report = BenchReport()
    b = spec.word_bits
    grid = [spec.sizes, spec.p, spec.methods, spec.k, spec.formats]
    if any(len(axis) == 0 for axis in grid):
        return report
    for n, m in spec.sizes:
        W0 = synthetic_matrix(n, m, spec.seed)
        X = Rng(spec.seed).spawn(1).generator().uniform(0.0, 1.0, size=(spec.vectors, n))
        dense_bits = b * n * m
        dense_ns = None
        if spec.time:
            W64 = W0.astype(np.float64)
            dense_ns = median_ns(lambda: X @ W64, spec.repeats)
        for p in spec.p:
            Wp = MagnitudePruner(p=p).fit_transform(W0) if p > 0 else W0
            for method in spec.methods:
                for k in spec.k:
                    base = {"n": n, "m": m, "p": p, "k": k, "method": method, "dense_bits": dense_bits,
                            "dense_dot_ns_median": dense_ns, "threads": spec.threads}
                    try:
                        qspec = PipelineSpec(prune_p=p if p > 0 else None,
                                             quant=None if method == "none" else method,
                                             k=k, seed=spec.seed, b=b)
                        quantizer = make_quantizer(qspec, Wp)
                        Wq = quantizer.fit_transform(Wp) if quantizer is not None else Wp
                        codebook = quantizer.codebook_ if quantizer is not None else None
                    except Exception as exc:  # keep sweeping
                        for fmt in spec.formats:
                            report.rows.append({**base, "format": fmt, "error": f"{type(exc).__name__}: {exc}"})
                        continue
                    for fmt in spec.formats:
                        row = {**base, "format": fmt, "error": None}
                        try:
                            C = compress(Wq, fmt, b, codebook)
                            rep = space_report(C)
                            row.update(
                                actual_bits=rep.actual_bits, stored_bits=rep.stored_bits,
                                bound_bits=rep.bound_bits, psi_actual=rep.psi_actual,
                                psi_bound=rep.psi_bound, ratio=1.0 / rep.psi_actual,
                                size_kb=rep.actual_bits / 8 / 1000,
                            )
                            if spec.time:
                                row["dot_ns_median"] = median_ns(lambda: pardot(X, C, spec.threads), spec.repeats)
                        except Exception as exc:
                            row["error"] = f"{type(exc).__name__}: {exc}"
                        report.rows.append(row)
                        if log is not None:
                            log(row)
    return report
