"""Magnitude pruning and weight-sharing quantizers.

All transformers follow the scikit-learn estimator protocol and operate on a
whole weight matrix. ``ignore_zeros=True`` leaves exact zeros untouched and
excludes them from fitting, which is how quantization is chained after
pruning. The functional helpers (``prune``, ``quantize_cws`` ...) wrap the
estimators and return ``(quantized, codebook)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from . import _levels
from .core import STORAGE_DTYPE, as_generator, check_matrix

SENTINEL = -1
METHODS = ("cws", "pws", "uq", "ecsq")


@dataclass(frozen=True, eq=False)
class Codebook:
    """Representative values plus the per-entry index map.

    ``assignments`` holds ``SENTINEL`` for zeros left out of quantization.
    """

    centers: np.ndarray
    assignments: np.ndarray
    method: str

    @property
    def k(self) -> int:
        return int(self.centers.size)

    @property
    def shape(self) -> tuple[int, int]:
        return self.assignments.shape

    def reconstruct(self) -> np.ndarray:
        out = np.zeros(self.assignments.shape, dtype=STORAGE_DTYPE)
        mask = self.assignments != SENTINEL
        out[mask] = self.centers[self.assignments[mask]]
        return out


@dataclass(frozen=True)
class PruneConfig:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p < 100.0:
            raise ValueError("percentile level p must lie in [0, 100)")


@dataclass(frozen=True)
class UqConfig:
    delta: float
    d: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if abs(self.d) > self.delta / 2:
            raise ValueError("bias d must lie in [-delta/2, delta/2]")


@dataclass(frozen=True)
class EcsqConfig:
    lam: float
    k_target: int
    max_iters: int = 300
    tol: float = 1e-9

    def __post_init__(self):
        if self.lam < 0 or self.k_target < 1 or self.max_iters < 1 or not self.tol > 0:
            raise ValueError("invalid ECSQ configuration")


def _eligible(W: np.ndarray, ignore_zeros: bool) -> np.ndarray:
    if ignore_zeros:
        return W != 0
    return np.ones(W.shape, dtype=bool)


def _codebook_from_values(Wq, mask, method) -> Codebook:
    centers = np.unique(Wq[mask])
    assignments = np.full(Wq.shape, SENTINEL, dtype=np.int32)
    assignments[mask] = np.searchsorted(centers, Wq[mask])
    return Codebook(centers.astype(STORAGE_DTYPE), assignments, method)


def _compact(centers, labels):
    used = np.unique(labels)
    remap = np.full(centers.size, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    return centers[used], remap[labels]


def nearest_rank_percentile(values: np.ndarray, p: float) -> float:
    """Nearest-rank percentile: the ``ceil(p/100 * N)``-th smallest value."""
    s = np.sort(values, kind="stable")
    rank = max(1, math.ceil(p / 100.0 * s.size))
    return float(s[rank - 1])


class MagnitudePruner(TransformerMixin, BaseEstimator):
    """Zero every weight whose magnitude does not exceed the p-th percentile.

    The percentile is taken over ``|W|`` with the nearest-rank rule, and the
    comparison is strict, so entries tied with the threshold are pruned.
    """

    def __init__(self, p=50.0):
        self.p = p

    def fit(self, W, y=None):
        PruneConfig(self.p)
        W = check_matrix(W)
        self.threshold_ = nearest_rank_percentile(np.abs(W).ravel(), self.p)
        self.n_features_in_ = W.shape[1]
        return self

    def transform(self, W):
        check_is_fitted(self)
        W = check_matrix(W)
        return np.where(np.abs(W) > self.threshold_, W, STORAGE_DTYPE(0.0))


class _WeightSharing(TransformerMixin, BaseEstimator):
    method = ""

    def _prepare(self, W):
        W = check_matrix(W)
        mask = _eligible(W, self.ignore_zeros)
        return W, mask, W[mask].astype(np.float64)

    def fit(self, W, y=None):
        self._fit_codebook(W)
        return self

    def fit_transform(self, W, y=None, **fit_params):
        return self._fit_codebook(W).reconstruct()

    def _fit_codebook(self, W) -> Codebook:
        raise NotImplementedError


class CWSQuantizer(_WeightSharing):
    """Clustering-based weight sharing (1-D k-means, k-means++ seeding)."""

    method = "cws"

    def __init__(self, k=32, ignore_zeros=False, seed=0, max_iter=300, tol=1e-6):
        self.k = k
        self.ignore_zeros = ignore_zeros
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol

    def _fit_codebook(self, W):
        W, mask, v = self._prepare(W)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if np.unique(v).size < self.k:
            raise ValueError("insufficient distinct values")
        init = _levels.kmeanspp_init(v, self.k, as_generator(self.seed))
        fit = _levels.fit_levels(v, init, max_iter=self.max_iter, tol=self.tol, empty="reseed")
        labels = _levels.assign(v, fit.centers, np.zeros(fit.centers.size))
        centers, labels = _compact(fit.centers, labels)
        self.cluster_centers_ = centers
        self.inertia_ = float(np.sum((v - centers[labels]) ** 2))
        self.n_iter_ = fit.n_iter
        return self._store(W, mask, centers, labels)

    def _store(self, W, mask, centers, labels):
        assignments = np.full(W.shape, SENTINEL, dtype=np.int32)
        assignments[mask] = labels
        self.codebook_ = Codebook(centers.astype(STORAGE_DTYPE), assignments, self.method)
        self.n_features_in_ = W.shape[1]
        return self.codebook_

    def transform(self, W):
        check_is_fitted(self)
        W, mask, v = self._prepare(W)
        c = self.cluster_centers_
        out = W.copy()
        out[mask] = c[_levels.assign(v, c, np.zeros(c.size))]
        return out


class PWSQuantizer(_WeightSharing):
    """Probabilistic weight sharing over quantile-delimited intervals.

    Each value is replaced by the lower or the upper end of the interval it
    falls in, with probabilities chosen so the expected value is unchanged.
    Interval ends are the linear-interpolation quantiles ``i/k`` of the
    fitted values; intervals are left-closed and the last one is closed.
    """

    method = "pws"

    def __init__(self, k=2, ignore_zeros=False, seed=0):
        self.k = k
        self.ignore_zeros = ignore_zeros
        self.seed = seed

    def _fit_codebook(self, W):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        W, mask, v = self._prepare(W)
        self.edges_ = np.quantile(v, np.linspace(0.0, 1.0, self.k + 1))
        self.n_features_in_ = W.shape[1]
        return self._sample(W, mask, v)

    def _sample(self, W, mask, v):
        edges = self.edges_
        idx = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, edges.size - 2)
        lo, hi = edges[idx], edges[idx + 1]
        width = hi - lo
        p_up = np.divide(v - lo, width, out=np.zeros_like(v), where=width > 0)
        up = as_generator(self.seed).random(v.size) < p_up
        Wq = W.copy()
        Wq[mask] = np.where(up, hi, lo).astype(STORAGE_DTYPE)
        self.codebook_ = _codebook_from_values(Wq, mask, self.method)
        return self.codebook_

    def transform(self, W):
        check_is_fitted(self)
        W, mask, v = self._prepare(W)
        if v.size and (v.min() < self.edges_[0] or v.max() > self.edges_[-1]):
            raise ValueError("values outside the fitted range")
        return self._sample(W, mask, v).reconstruct()


def uq_formula(v: np.ndarray, delta: float, d: float) -> np.ndarray:
    # np.round rounds half to even.
    return delta * np.round((v + d) / delta) - d


class UniformQuantizer(_WeightSharing):
    """Uniform grid quantization ``delta * round((w + d) / delta) - d``."""

    method = "uq"

    def __init__(self, delta=1.0, d=0.0, ignore_zeros=False):
        self.delta = delta
        self.d = d
        self.ignore_zeros = ignore_zeros

    def _fit_codebook(self, W):
        UqConfig(self.delta, self.d)
        W, mask, v = self._prepare(W)
        Wq = W.copy()
        Wq[mask] = uq_formula(v, self.delta, self.d).astype(STORAGE_DTYPE)
        Wq += STORAGE_DTYPE(0.0)
        self.codebook_ = _codebook_from_values(Wq, mask, self.method)
        self.n_features_in_ = W.shape[1]
        return self.codebook_

    def transform(self, W):
        return self._fit_codebook(W).reconstruct()


class ECSQQuantizer(_WeightSharing):
    """Entropy-constrained scalar quantization.

    Minimises mean squared error plus ``lam`` times the entropy of the level
    distribution by alternating assignment (each value goes to the level
    minimising ``(w - w_i)**2 - lam * log2(p_i)``) with mean and mass updates.
    Levels that lose all members are dropped. Seeding is k-means++ with the
    same stream as :class:`CWSQuantizer`, so ``lam=0`` reproduces it.
    """

    method = "ecsq"

    def __init__(self, lam=0.0, k_target=32, max_iter=300, tol=1e-9, ignore_zeros=False, seed=0):
        self.lam = lam
        self.k_target = k_target
        self.max_iter = max_iter
        self.tol = tol
        self.ignore_zeros = ignore_zeros
        self.seed = seed

    def _fit_codebook(self, W):
        EcsqConfig(self.lam, self.k_target, self.max_iter, self.tol)
        W, mask, v = self._prepare(W)
        if np.unique(v).size < self.k_target:
            raise ValueError("insufficient distinct values")
        init = _levels.kmeanspp_init(v, self.k_target, as_generator(self.seed))
        fit = _levels.fit_levels(
            v, init, lam=self.lam, max_iter=self.max_iter, tol=self.tol, relative=False, empty="drop"
        )
        self.cost_history_ = list(fit.history)
        self.n_iter_ = fit.n_iter
        self.converged_ = fit.converged
        if not fit.converged:
            warnings.warn(
                f"ECSQ did not converge in {self.max_iter} iterations; returning the last iterate",
                ConvergenceWarning,
                stacklevel=3,
            )
        labels = _levels.assign(v, fit.centers, self._beta(fit.probs))
        centers, labels = _compact(fit.centers, labels)
        self.levels_ = centers
        self.probs_ = np.bincount(labels, minlength=centers.size) / max(v.size, 1)
        assignments = np.full(W.shape, SENTINEL, dtype=np.int32)
        assignments[mask] = labels
        self.codebook_ = Codebook(centers.astype(STORAGE_DTYPE), assignments, self.method)
        self.n_features_in_ = W.shape[1]
        return self.codebook_

    def _beta(self, probs):
        return -self.lam * np.log2(probs) if self.lam > 0 else np.zeros(probs.size)

    def transform(self, W):
        check_is_fitted(self)
        W, mask, v = self._prepare(W)
        out = W.copy()
        out[mask] = self.levels_[_levels.assign(v, self.levels_, self._beta(self.probs_))]
        return out


def lagrange_cost(W_orig, W_quant, lam: float, mask=None) -> float:
    """``D + lam * H`` of a quantization, averaged over the quantized entries."""
    Wo = np.asarray(W_orig, dtype=np.float64)
    Wq = np.asarray(W_quant, dtype=np.float64)
    if mask is not None:
        Wo, Wq = Wo[mask], Wq[mask]
    Wo, Wq = Wo.ravel(), Wq.ravel()
    _, inv, counts = np.unique(Wq, return_inverse=True, return_counts=True)
    p = counts / Wq.size
    return float(np.sum((Wo - Wq) ** 2 - lam * np.log2(p)[inv]) / Wq.size)


# Functional interface


def prune(W, cfg) -> np.ndarray:
    p = cfg.p if isinstance(cfg, PruneConfig) else cfg
    return MagnitudePruner(p=p).fit_transform(W)


def quantize_cws(W, k: int, rng=None, ignore_zeros: bool = False):
    cb = CWSQuantizer(k=k, ignore_zeros=ignore_zeros, seed=rng)._fit_codebook(W)
    return cb.reconstruct(), cb


def quantize_pws(W, k: int, rng=None, ignore_zeros: bool = False):
    cb = PWSQuantizer(k=k, ignore_zeros=ignore_zeros, seed=rng)._fit_codebook(W)
    return cb.reconstruct(), cb


def quantize_uq(W, cfg: UqConfig, ignore_zeros: bool = False):
    cb = UniformQuantizer(delta=cfg.delta, d=cfg.d, ignore_zeros=ignore_zeros)._fit_codebook(W)
    return cb.reconstruct(), cb


def quantize_ecsq(W, cfg: EcsqConfig, rng=None, ignore_zeros: bool = False):
    est = ECSQQuantizer(
        lam=cfg.lam, k_target=cfg.k_target, max_iter=cfg.max_iters, tol=cfg.tol,
        ignore_zeros=ignore_zeros, seed=rng,
    )
    cb = est._fit_codebook(W)
    return cb.reconstruct(), cb


@dataclass(frozen=True)
class TuneResult:
    config: object
    k_achieved: int
    gap: int
    exact: bool


def _level_count(method, v, cfg, seed) -> int:
    W = v[None, :]
    if method == "uq":
        return int(np.unique(uq_formula(v, cfg.delta, cfg.d).astype(STORAGE_DTYPE)).size)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        _, cb = quantize_ecsq(W, cfg, rng=seed)
    return cb.k


def tune_to_k(method: str, W, k: int, *, ignore_zeros: bool = False, seed=0, max_steps: int = 64) -> TuneResult:
    """Search the UQ step or the ECSQ multiplier for exactly ``k`` levels.

    UQ (``d = 0``) bisects ``delta`` on a log scale between the smallest gap
    of the distinct values and twice their range. ECSQ starts from
    ``min(2k, distinct)`` seeded levels and bisects ``lam`` in ``[0, lam_hi]``,
    doubling ``lam_hi`` until at most ``k`` levels survive. If no probe hits
    ``k`` the closest count is returned with ``exact=False``.
    """
    method = method.lower()
    if method not in ("uq", "ecsq"):
        raise ValueError("tune_to_k supports 'uq' and 'ecsq'")
    if k < 2:
        raise ValueError("k must be at least 2")
    W = check_matrix(W)
    v = W[_eligible(W, ignore_zeros)].astype(np.float64)
    distinct = np.unique(v)
    if method == "uq":
        gaps = np.diff(distinct)
        if distinct.size <= k:
            delta = float(gaps.min()) if gaps.size else 1.0
            cfg = UqConfig(delta, 0.0)
            got = _level_count("uq", v, cfg, seed)
            return TuneResult(cfg, got, got - k, got == k)
        make = lambda x: UqConfig(x, 0.0)  # noqa: E731
        lo, hi = math.log(gaps.min()), math.log(2.0 * (distinct[-1] - distinct[0]))
        to_param = math.exp
    else:
        if distinct.size <= k:
            cfg = EcsqConfig(0.0, int(distinct.size))
            got = _level_count("ecsq", v, cfg, seed)
            return TuneResult(cfg, got, got - k, got == k)
        start = int(min(2 * k, distinct.size))
        make = lambda x: EcsqConfig(x, start)  # noqa: E731
        lo, hi = 0.0, max(float(np.var(v)), 1e-12)
        for _ in range(max_steps):
            if _level_count("ecsq", v, make(hi), seed) <= k:
                break
            hi *= 2.0
        to_param = float

    best = None
    for x in (lo, hi):
        cfg = make(to_param(x))
        got = _level_count(method, v, cfg, seed)
        if best is None or abs(got - k) < abs(best[1] - k):
            best = (cfg, got)
        if got == k:
            return TuneResult(cfg, got, 0, True)
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        cfg = make(to_param(mid))
        got = _level_count(method, v, cfg, seed)
        if abs(got - k) < abs(best[1] - k):
            best = (cfg, got)
        if got == k:
            return TuneResult(cfg, got, 0, True)
        if got > k:
            lo = mid
        else:
            hi = mid
    cfg, got = best
    return TuneResult(cfg, got, got - k, False)


def aggregate_gradient(grad, cb: Codebook) -> np.ndarray:
    """Per-center sums of ``grad`` over the entries mapped to each center."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != cb.shape:
        raise ValueError(f"shape mismatch: gradient {grad.shape}, codebook {cb.shape}")
    mask = cb.assignments != SENTINEL
    return np.bincount(cb.assignments[mask], weights=grad[mask], minlength=cb.k)
