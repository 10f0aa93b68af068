"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 corrupt data.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import container
from .bench import BenchReport, median_ns, parse_sweep_spec, run_sweep
from .core import stats
from .estimator import PipelineSpec, run_pipeline
from .formats import FORMATS, K_DISTINCT, WORST_CASE, bound_bits, crossover_s, space_report
from .huffman import CorruptStreamError
from .kernels import pardot
from .quantization import METHODS

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CORRUPT = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _default_seed() -> int:
    return int(os.environ.get("SHAM_SEED", "0"))


def _emit(record: dict, fmt: str, stream=None) -> None:
    stream = stream or sys.stdout
    if fmt == "json":
        stream.write(json.dumps(record, indent=2) + "\n")
        return
    w = csv.DictWriter(stream, fieldnames=list(record), lineterminator="\n")
    w.writeheader()
    w.writerow(record)


def cmd_compress(args) -> int:
    W = container.read_matrix(args.input)
    try:
        spec = PipelineSpec(
            prune_p=args.prune_p, quant=args.quant, k=args.k, seed=args.seed,
            format=args.format, b=args.word_bits, delta=args.delta, lam=args.lam,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    Wq, _, C = run_pipeline(W, spec)
    container.save(args.out, C)
    if args.save_matrix:
        container.write_matrix(args.save_matrix, Wq)
    _emit(space_report(C).as_dict(), args.report)
    return EXIT_OK


def cmd_decompress(args) -> int:
    C = container.load(args.input)
    container.write_matrix(args.out, C.to_dense())
    return EXIT_OK


def cmd_verify(args) -> int:
    C = container.load(args.compressed)
    W = container.read_matrix(args.original)
    R = C.to_dense()
    if R.shape != W.shape:
        print(f"FAIL: shape {R.shape} != {W.shape}")
        return EXIT_FAIL
    diff = np.flatnonzero((R != W).ravel())
    if diff.size:
        i, j = np.unravel_index(diff[0], W.shape)
        print(f"FAIL: {diff.size} entries differ; first at ({i}, {j}): {R[i, j]!r} != {W[i, j]!r}")
        return EXIT_FAIL
    print(f"OK: {C.format} matrix {W.shape[0]}x{W.shape[1]} matches")
    return EXIT_OK


def cmd_dot(args) -> int:
    C = container.load(args.compressed)
    X = container.read_matrix(args.vectors).astype(np.float64)
    if X.shape[1] != C.n:
        if X.shape[0] == C.n and X.shape[1] == 1:
            X = X.T
        else:
            raise UsageError(f"dimension mismatch: vectors have {X.shape[1]} entries, matrix has {C.n} rows")
    out = pardot(X, C, args.threads)
    ns = median_ns(lambda: pardot(X, C, args.threads), args.repeats) if args.repeats else None
    _write_result(args.out, out)
    if ns is not None:
        print(f"dot: {X.shape[0]}x{C.n} @ {C.format} {C.n}x{C.m}, threads={args.threads}, "
              f"median {ns} ns over {args.repeats} runs", file=sys.stderr)
    return EXIT_OK


def _write_result(path, out: np.ndarray) -> None:
    # float64 results: CSV with round-trip precision, .npy, or raw little-endian bytes
    if path is None:
        np.savetxt(sys.stdout, out, delimiter=",", fmt="%.17g")
    elif path.endswith(".csv"):
        np.savetxt(path, out, delimiter=",", fmt="%.17g")
    elif path.endswith(".npy"):
        np.save(path, out)
    else:
        Path(path).write_bytes(out.astype("<f8").tobytes())


def cmd_bounds(args) -> int:
    if args.input:
        _emit(space_report(container.load(args.input)).as_dict(), args.report)
        return EXIT_OK
    if None in (args.n, args.m, args.k):
        raise UsageError("bounds needs a container or --n, --m and --k")
    n, m, k, b, s = args.n, args.m, args.k, args.word_bits, args.s
    dense = b * n * m
    record = {"n": n, "m": m, "s": s, "k": k, "b": b}
    for fmt in ("ham", "sham"):
        for hyp in (K_DISTINCT, WORST_CASE):
            bits = bound_bits(fmt, n, m, s, k, b, hyp)
            record[f"{fmt}_{hyp}_bits"] = bits
            record[f"{fmt}_{hyp}_psi"] = bits / dense
    record["csc_bits"] = (2 * s * n * m + m + 1) * b
    record["crossover_s"] = crossover_s(k, b, n, m)
    _emit(record, args.report)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec = parse_sweep_spec(Path(args.spec).read_text())
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.threads is not None:
        spec.threads = args.threads
    report: BenchReport = run_sweep(spec)
    if args.out:
        prefix = Path(args.out)
        prefix.with_suffix(".csv").write_text(report.to_csv())
        prefix.with_suffix(".json").write_text(report.to_json())
    sys.stdout.write(report.to_json() + "\n" if args.report == "json" else report.to_csv())
    return EXIT_OK


def cmd_stats(args) -> int:
    st = stats(container.read_matrix(args.input))
    _emit({"n": st.n, "m": st.m, "q": st.q, "s": st.s, "k_distinct": st.k_distinct}, args.report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sham", description="Huffman address map matrix compression")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, report="json"):
        p.add_argument("--word-bits", type=int, choices=(32, 64), default=32)
        p.add_argument("--report", choices=("csv", "json"), default=report)

    p = sub.add_parser("compress", help="prune, quantize and store a matrix")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--prune-p", type=float)
    p.add_argument("--quant", choices=METHODS)
    p.add_argument("--k", type=int)
    p.add_argument("--delta", type=float, help="UQ step (instead of tuning to --k)")
    p.add_argument("--lam", type=float, help="ECSQ multiplier (instead of tuning to --k)")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--format", choices=FORMATS + ("auto",), default="auto")
    p.add_argument("--save-matrix", help="also write the stored (post-quantization) matrix")
    common(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="expand a container to a dense matrix file")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("verify", help="check a container against a dense matrix bit for bit")
    p.add_argument("compressed")
    p.add_argument("original")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dot", help="multiply vectors by a compressed matrix")
    p.add_argument("compressed")
    p.add_argument("vectors", help="r x n matrix file (CSV or raw); one row per vector")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--repeats", type=int, default=5, help="timed runs after one warm-up (0 to skip)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dot)

    p = sub.add_parser("bounds", help="size bounds for a container or for given parameters")
    p.add_argument("input", nargs="?")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--k", type=int)
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="run a size/time grid from a spec file")
    p.add_argument("spec")
    p.add_argument("--out", help="write <out>.csv and <out>.json")
    p.add_argument("--threads", type=int)
    p.add_argument("--report", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="non-zero count, ratio and distinct values of a matrix")
    p.add_argument("input")
    p.add_argument("--report", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (container.CorruptContainerError, CorruptStreamError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except (UsageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
