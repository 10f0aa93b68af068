"""One-dimensional level fitting shared by k-means and ECSQ.

Each level ``i`` has a center ``c_i`` and an additive penalty ``beta_i``; a
value ``w`` is charged ``(w - c_i)**2 + beta_i``. With equal curvature the
cheapest level is piecewise constant in ``w``, so assignment reduces to a
lower envelope of lines plus a ``searchsorted`` over its breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def kmeanspp_init(v: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    """k-means++ seeding over the multiset ``v``; returns ``k`` sorted centers."""
    centers = np.empty(k)
    centers[0] = v[gen.integers(v.size)]
    d2 = (v - centers[0]) ** 2
    for j in range(1, k):
        cum = np.cumsum(d2)
        total = cum[-1]
        if total <= 0.0:
            raise ValueError("insufficient distinct values")
        i = int(np.searchsorted(cum, gen.random() * total, side="right"))
        i = min(i, v.size - 1)
        while d2[i] == 0.0:  # guard against landing on a zero-mass slot
            i = (i + 1) % v.size
        centers[j] = v[i]
        np.minimum(d2, (v - centers[j]) ** 2, out=d2)
    return np.sort(centers)


def envelope(centers: np.ndarray, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Levels on the lower envelope and the breakpoints between them.

    ``centers`` must be sorted ascending. Returns ``(levels, bps)`` with
    ``len(bps) == len(levels) - 1``; values ``<= bps[s]`` (and above the
    previous breakpoint) go to ``levels[s]``. Ties go to the lower index.
    """
    levels: list[int] = []
    bps: list[float] = []
    for j in range(centers.size):
        if levels and centers[j] == centers[levels[-1]]:
            if beta[j] < beta[levels[-1]]:
                levels.pop()
                if bps:
                    bps.pop()
            else:
                continue
        while levels:
            t = levels[-1]
            x = 0.5 * (centers[t] + centers[j]) + (beta[j] - beta[t]) / (2.0 * (centers[j] - centers[t]))
            if bps and x <= bps[-1]:
                levels.pop()
                bps.pop()
                continue
            break
        if levels:
            bps.append(x)
        levels.append(j)
    return np.asarray(levels, dtype=np.intp), np.asarray(bps, dtype=np.float64)


def assign(v: np.ndarray, centers: np.ndarray, beta: np.ndarray) -> np.ndarray:
    levels, bps = envelope(centers, beta)
    return levels[np.searchsorted(bps, v, side="left")]


@dataclass
class LevelFit:
    centers: np.ndarray
    labels: np.ndarray
    probs: np.ndarray
    history: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def _cost(v, centers, labels, probs, lam):
    dist = float(np.sum((v - centers[labels]) ** 2))
    if lam == 0.0:
        return dist / v.size
    rate = float(np.sum(-np.log2(probs)[labels]))
    return (dist + lam * rate) / v.size


def fit_levels(
    v: np.ndarray,
    init: np.ndarray,
    *,
    lam: float = 0.0,
    max_iter: int = 300,
    tol: float = 1e-6,
    relative: bool = True,
    empty: str = "reseed",
) -> LevelFit:
    """Alternate assignment and center/probability updates.

    ``lam == 0`` is plain Lloyd. ``empty="reseed"`` moves an empty level to
    the farthest point (k-means); ``empty="drop"`` discards it (ECSQ).
    Stops on a fixed point, when the cost change falls below ``tol``
    (relative to the previous cost if ``relative``), or after ``max_iter``.
    """
    n = v.size
    centers = np.sort(np.asarray(init, dtype=np.float64))
    probs = np.full(centers.size, 1.0 / centers.size)
    labels = None
    prev_state = None
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        beta = -lam * np.log2(probs) if lam > 0.0 else np.zeros(centers.size)
        new_labels = assign(v, centers, beta)
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            it -= 1
            break
        kk = centers.size
        counts = np.bincount(new_labels, minlength=kk)
        if empty == "reseed" and np.any(counts == 0):
            dist = (v - centers[new_labels]) ** 2
            far = np.argsort(-dist, kind="stable")
            taken = 0
            for e in np.flatnonzero(counts == 0):
                while taken < n and (dist[far[taken]] == 0.0 or counts[new_labels[far[taken]]] <= 1):
                    taken += 1
                if taken == n:
                    break  # nothing movable; the level is dropped below
                idx = far[taken]
                counts[new_labels[idx]] -= 1
                new_labels[idx] = e
                counts[e] = 1
                taken += 1
        sums = np.bincount(new_labels, weights=v, minlength=kk)
        keep = counts > 0
        if not np.all(keep):
            remap = np.cumsum(keep) - 1
            new_labels = remap[new_labels]
            sums, counts = sums[keep], counts[keep]
        new_centers = sums / counts
        order = np.argsort(new_centers, kind="stable")
        if not np.all(order == np.arange(order.size)):
            inv = np.empty_like(order)
            inv[order] = np.arange(order.size)
            new_labels = inv[new_labels]
            new_centers, counts = new_centers[order], counts[order]
        new_probs = counts / n
        cost = _cost(v, new_centers, new_labels, new_probs, lam)
        if history and cost > history[-1]:
            # Rounding noise only; the exact sequence cannot increase.
            centers, labels, probs = prev_state
            converged = True
            it -= 1
            break
        prev_state = (centers, labels, probs)
        centers, labels, probs = new_centers, new_labels, new_probs
        history.append(cost)
        if len(history) >= 2:
            delta = history[-2] - cost
            scale = history[-2] if relative else 1.0
            if scale == 0.0 or delta <= tol * scale:
                converged = True
                break
    if labels is None:
        labels = assign(v, centers, np.zeros(centers.size))
    return LevelFit(centers, labels, probs, history, it, converged)
