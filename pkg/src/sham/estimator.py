"""Prune, quantize and store a weight matrix behind one estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import check_matrix, check_word_bits
from .formats import FORMATS, choose_format, compress, space_report
from .kernels import pardot
from .quantization import (
    METHODS,
    CWSQuantizer,
    ECSQQuantizer,
    MagnitudePruner,
    PWSQuantizer,
    UniformQuantizer,
    tune_to_k,
)


@dataclass(frozen=True)
class PipelineSpec:
    """Pr-X chain: optional pruning, optional quantizer, storage format."""

    prune_p: float | None = None
    quant: str | None = None
    k: int | None = None
    seed: int = 0
    format: str = "auto"
    b: int = 32
    delta: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.quant is not None and self.quant not in METHODS:
            raise ValueError(f"unknown quantizer {self.quant!r}; expected one of {METHODS}")
        if self.format not in FORMATS + ("auto",):
            raise ValueError(f"unknown format {self.format!r}")
        if self.quant in ("cws", "pws") and self.k is None:
            raise ValueError(f"{self.quant} needs k")
        if self.quant == "uq" and self.k is None and self.delta is None:
            raise ValueError("uq needs k or delta")
        if self.quant == "ecsq" and self.k is None:
            raise ValueError("ecsq needs k")
        check_word_bits(self.b)


def make_quantizer(spec: PipelineSpec, W=None):
    """Build the quantizer for ``spec``; UQ/ECSQ are tuned on ``W`` when needed."""
    iz = spec.prune_p is not None
    if spec.quant == "cws":
        return CWSQuantizer(k=spec.k, ignore_zeros=iz, seed=spec.seed)
    if spec.quant == "pws":
        return PWSQuantizer(k=spec.k, ignore_zeros=iz, seed=spec.seed)
    if spec.quant == "uq":
        if spec.delta is not None:
            return UniformQuantizer(delta=spec.delta, ignore_zeros=iz)
        cfg = tune_to_k("uq", W, spec.k, ignore_zeros=iz).config
        return UniformQuantizer(delta=cfg.delta, d=cfg.d, ignore_zeros=iz)
    if spec.quant == "ecsq":
        if spec.lam is not None:
            return ECSQQuantizer(lam=spec.lam, k_target=spec.k, ignore_zeros=iz, seed=spec.seed)
        cfg = tune_to_k("ecsq", W, spec.k, ignore_zeros=iz, seed=spec.seed).config
        return ECSQQuantizer(lam=cfg.lam, k_target=cfg.k_target, ignore_zeros=iz, seed=spec.seed)
    return None


def run_pipeline(W, spec: PipelineSpec):
    """Returns ``(weights, codebook, compressed)``; ``codebook`` may be None."""
    W = check_matrix(W)
    if spec.prune_p is not None:
        W = MagnitudePruner(p=spec.prune_p).fit_transform(W)
    codebook = None
    quantizer = make_quantizer(spec, W)
    if quantizer is not None:
        W = quantizer.fit_transform(W)
        codebook = quantizer.codebook_
    fmt = spec.format
    if fmt == "auto":
        fmt = choose_format(W, b=spec.b)
    return W, codebook, compress(W, fmt, spec.b, codebook)


class MatrixCompressor(TransformerMixin, BaseEstimator):
    """Compress a weight matrix at ``fit``; ``transform(X)`` returns ``X @ W``.

    The product is evaluated on the compressed representation with
    ``n_jobs`` row chunks; the dense weights are never expanded.

    Parameters mirror :class:`PipelineSpec`. ``format="auto"`` picks sHAM
    when the non-zero ratio falls under the bound crossover, HAM otherwise.
    """

    def __init__(
        self,
        prune_p=None,
        quant=None,
        k=32,
        seed=0,
        format="auto",
        word_bits=32,
        delta=None,
        lam=None,
        n_jobs=1,
    ):
        self.prune_p = prune_p
        self.quant = quant
        self.k = k
        self.seed = seed
        self.format = format
        self.word_bits = word_bits
        self.delta = delta
        self.lam = lam
        self.n_jobs = n_jobs

    def _spec(self) -> PipelineSpec:
        return PipelineSpec(
            prune_p=self.prune_p, quant=self.quant, k=self.k, seed=self.seed,
            format=self.format, b=self.word_bits, delta=self.delta, lam=self.lam,
        )

    def fit(self, W, y=None):
        self.weights_, self.codebook_, self.compressed_ = run_pipeline(W, self._spec())
        self.format_ = self.compressed_.format
        self.space_report_ = space_report(self.compressed_)
        self.n_features_in_ = self.weights_.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = np.asarray(X, dtype=np.float64)
        out = pardot(X, self.compressed_, self.n_jobs)
        return out[0] if X.ndim == 1 else out

    def decompress(self) -> np.ndarray:
        check_is_fitted(self)
        return self.compressed_.to_dense()
