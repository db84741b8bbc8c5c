"""Hard K-means: Lloyd iterations with a best-of-restarts policy.

All entry points take (n_features, n_points) matrices. Initial centroids are
distinct data columns drawn uniformly; ties in the nearest-centroid rule go
to the smallest cluster index; a cluster that empties out during iteration is
re-seeded at the point farthest from its current centroid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .rng import SeedLike, rng_from, spawn


@dataclass(frozen=True)
class KMeansConfig:
    n_clusters: int
    max_iter: int = 300
    restarts: int = 5
    tol: float = 1e-6  # relative objective decrease below which iteration stops

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.tol < 0:
            raise ValueError("tol must be non-negative")


@dataclass
class Clustering:
    """Labels plus explicit centroids (columns) and the summed squared distance."""

    labels: np.ndarray          # (n_points,) int
    centroids: np.ndarray       # (n_features, n_clusters)
    objective: float
    iterations: int
    assign_ops: int = 0         # point-to-centroid coordinate ops, for work accounting
    point_dists: np.ndarray | None = field(default=None, repr=False)  # (n_points, K) at final assignment


def assign_to_nearest(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Label each column of X with the index of its nearest centroid column."""
    if X.shape[0] != centroids.shape[0]:
        raise ValueError("centroid dimension does not match the data")
    d = cdist(np.ascontiguousarray(X.T), np.ascontiguousarray(centroids.T), "sqeuclidean")
    return d.argmin(axis=1)


def _reseed_empty(XT, centroids, own_sqdist, empty):
    # farthest point from its current centroid takes over each empty cluster
    own = own_sqdist.copy()
    for k in empty:
        j = int(own.argmax())
        centroids[k] = XT[j]
        own[j] = -1.0


def update_centroids(X: np.ndarray, labels: np.ndarray, n_clusters: int) -> np.ndarray:
    """Mean of each cluster's members as centroid columns.

    An empty cluster is re-seeded at the point farthest from its own
    cluster's updated mean.
    """
    XT = np.ascontiguousarray(X.T)
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=n_clusters)
    centroids = np.zeros((n_clusters, X.shape[0]))
    for k in range(n_clusters):
        if counts[k]:
            centroids[k] = XT[labels == k].mean(axis=0)
    if (counts == 0).any():
        own = ((XT - centroids[labels]) ** 2).sum(axis=1)
        _reseed_empty(XT, centroids, own, np.flatnonzero(counts == 0))
    return centroids.T


def lloyd_kmeans(
    X: np.ndarray,
    cfg: KMeansConfig,
    seed: SeedLike = 0,
    init: np.ndarray | None = None,
    keep_distances: bool = False,
) -> Clustering:
    """One Lloyd run: alternate nearest-centroid assignment and mean updates.

    Stops when labels stabilize, when the relative objective decrease falls
    below cfg.tol, or at cfg.max_iter. The objective never increases from one
    assignment to the next.
    """
    dims, n = X.shape
    k = cfg.n_clusters
    if k > n:
        raise ValueError(f"n_clusters={k} exceeds the number of points {n}")
    XT = np.ascontiguousarray(X.T)
    if init is not None:
        if init.shape != (dims, k):
            raise ValueError(f"init must have shape {(dims, k)}, got {init.shape}")
        centroids = np.ascontiguousarray(init.T, dtype=np.float64)
    else:
        centroids = XT[rng_from(seed).choice(n, size=k, replace=False)].copy()

    rows = np.arange(n)
    prev_labels = None
    prev_obj = None
    labels = None
    d = None
    ops = 0
    iterations = 0
    for _ in range(max(cfg.max_iter, 1)):
        iterations += 1
        d = cdist(XT, centroids, "sqeuclidean")
        ops += n * k * dims
        labels = d.argmin(axis=1)
        own = d[rows, labels]
        obj = float(own.sum())
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        counts = np.bincount(labels, minlength=k)
        for c in range(k):
            if counts[c]:
                centroids[c] = XT[labels == c].mean(axis=0)
        if (counts == 0).any():
            _reseed_empty(XT, centroids, own, np.flatnonzero(counts == 0))
        if prev_obj is not None and prev_obj - obj <= cfg.tol * prev_obj:
            break
        prev_labels = labels
        prev_obj = obj

    return Clustering(
        labels=labels,
        centroids=centroids.T.copy(),
        objective=obj,
        iterations=iterations,
        assign_ops=ops,
        point_dists=d if keep_distances else None,
    )


def best_of_restarts(
    X: np.ndarray,
    cfg: KMeansConfig,
    seed: SeedLike = 0,
    keep_distances: bool = False,
) -> Clustering:
    """Minimum-objective clustering over cfg.restarts independent Lloyd runs.

    Restart r uses the child seed (seed, r); ties keep the earliest restart.
    """
    best = None
    ops = 0
    for r in range(cfg.restarts):
        run = lloyd_kmeans(X, cfg, spawn(seed, r), keep_distances=keep_distances)
        ops += run.assign_ops
        if best is None or run.objective < best.objective:
            best = run
    best.assign_ops = ops
    return best
