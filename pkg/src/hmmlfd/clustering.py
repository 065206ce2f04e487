"""k-means codebook over pooled key-point vectors and symbol encoding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray
    distortion: float = 0.0
    history: tuple = field(default=(), repr=False)  # distortion after every Lloyd iteration

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.centroids, dtype=float))
        if len(C) < 1:
            raise InvalidArgumentError("codebook needs at least one centroid")
        if self.distortion < 0:
            raise InvalidArgumentError("distortion must be non-negative")
        if len(np.unique(C, axis=0)) != len(C):
            raise InvalidArgumentError("centroids must be pairwise distinct")
        object.__setattr__(self, "centroids", C)

    @property
    def k(self):
        return len(self.centroids)

    def __eq__(self, other):
        return (isinstance(other, Codebook) and np.array_equal(self.centroids, other.centroids)
                and self.distortion == other.distortion)

    __hash__ = None


def choose_k(counts):
    """Mean key-point count per demonstration, rounded half to even, at least 2."""
    counts = list(counts)
    if not counts:
        raise InvalidArgumentError("need at least one demonstration")
    return max(2, round(sum(counts) / len(counts)))


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def assign(X, C):
    """Nearest centroid per row; ties go to the lowest index (argmin order)."""
    return np.argmin(_sq_dists(X, C), axis=1)


def kmeans_pp_init(X, k, rng):
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.uniform(0, total), side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def _repair_empty(X, labels, C, k):
    """Give each empty cluster the point farthest from the centroid of the largest cluster."""
    for j in range(k):
        if np.any(labels == j):
            continue
        sizes = np.bincount(labels, minlength=k)
        big = int(np.argmax(sizes))
        members = np.flatnonzero(labels == big)
        far = members[np.argmax(((X[members] - C[big]) ** 2).sum(axis=1))]
        labels[far] = j
        C[j] = X[far]
        C[big] = X[labels == big].mean(axis=0)
    return labels, C


def kmeans(vectors, k, seed=0, tol=1e-9, max_iter=300):
    """Lloyd's algorithm from a seeded k-means++ start.

    Stops when the relative drop in distortion falls below ``tol``. Returns the
    codebook and the per-vector assignment.
    """
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError("vectors must be a 2-D array")
    if k < 1 or len(X) < k:
        raise InvalidArgumentError(f"cannot form {k} clusters from {len(X)} vectors")
    if len(np.unique(X, axis=0)) < k:
        raise InvalidArgumentError(f"fewer than {k} distinct vectors")
    rng = np.random.default_rng(seed)
    C = kmeans_pp_init(X, k, rng)
    labels, C = _repair_empty(X, assign(X, C), C, k)
    history = []
    prev = np.inf
    for _ in range(max_iter):
        C = np.array([X[labels == j].mean(axis=0) for j in range(k)])
        labels, C = _repair_empty(X, assign(X, C), C, k)
        dist = float(((X - C[labels]) ** 2).sum())
        history.append(dist)
        if dist == 0.0 or (np.isfinite(prev) and prev - dist <= tol * prev):
            break
        prev = dist
    # final centroids are the means of the final partition
    C = np.array([X[labels == j].mean(axis=0) for j in range(k)])
    dist = float(((X - C[labels]) ** 2).sum())
    return Codebook(C, dist, tuple(history)), labels


def kmeans_restarts(vectors, k, restarts=10, seed=0, **kwargs):
    """Best (lowest distortion) of several seeded runs."""
    best = None
    for r in range(restarts):
        cb, labels = kmeans(vectors, k, seed=seed + r, **kwargs)
        if best is None or cb.distortion < best[0].distortion:
            best = (cb, labels)
    return best


def quantize(vector, codebook):
    d = ((codebook.centroids - np.asarray(vector, dtype=float)) ** 2).sum(axis=1)
    return int(np.argmin(d))


def encode_demo(keypoints, codebook, return_runs=False):
    """Symbol sequence of a demonstration's key-points with repeats collapsed.

    With ``return_runs`` also returns, for every symbol, the indices of the
    key-points it stands for.
    """
    symbols, runs = [], []
    for i, kp in enumerate(keypoints):
        s = quantize(kp.vector, codebook)
        if symbols and symbols[-1] == s:
            runs[-1].append(i)
        else:
            symbols.append(s)
            runs.append([i])
    return (symbols, runs) if return_runs else symbols
