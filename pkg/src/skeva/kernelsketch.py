"""Kernel K-means on point sketches.

Feature-space centroids are never materialized: a cluster is its member list,
and every distance is expanded into kernel sums. Each draw clusters a small
random subset of points, grows the clusters with a few more points, re-groups
the original subset against the grown clusters, and counts how many points
kept their cluster. The draw with the most stable points wins and the full
data set is assigned to its clusters by kernel distance, streamed in blocks
so the big cross-Gram never exists at once.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import check_matrix, sample_indices
from .kernels import KernelSpec, GaussianKernel, LinearKernel, SigmoidKernel, gram
from .kmeans import KMeansConfig
from .rng import SeedLike, rng_from, spawn


@dataclass
class KernelClustering:
    """Cluster memberships over a point set; centroids are implicit means in feature space."""

    labels: np.ndarray
    objective: float
    iterations: int

    @property
    def members(self) -> list[np.ndarray]:
        k = int(self.labels.max()) + 1 if self.labels.size else 0
        return [np.flatnonzero(self.labels == c) for c in range(k)]


@dataclass
class KernelDraw:
    draw: int
    vn_size: int
    wall_ms: float
    empty_clusters: int = 0


@dataclass
class KeskevaOutcome:
    labels: np.ndarray             # full-data labels
    sketch_idx: np.ndarray         # winning draw's point indices
    sketch_labels: np.ndarray      # winner's clustering of those points
    winner: int
    trace: list[KernelDraw] = field(default_factory=list)
    wall_ms: float = 0.0


def self_kernel(spec: KernelSpec, points: np.ndarray) -> np.ndarray:
    """kappa(x, x) for each point column."""
    points = np.asarray(points, dtype=np.float64)
    if isinstance(spec, GaussianKernel):
        return np.full(points.shape[1], np.exp(spec.log_normalizer))
    sq = (points * points).sum(axis=0)
    if isinstance(spec, LinearKernel):
        return sq
    if isinstance(spec, SigmoidKernel):
        return np.tanh(spec.alpha * sq + spec.bias)
    raise TypeError(f"unknown kernel spec {spec!r}")


def cluster_self_similarity(G: np.ndarray, members: np.ndarray) -> float:
    """(1/|C|^2) sum of kernel values over member pairs; the cacheable distance term."""
    members = np.asarray(members)
    if members.size == 0:
        raise ValueError("cluster has no members")
    block = G[np.ix_(members, members)]
    return float(block.sum()) / members.size**2


def kernel_point_to_cluster_dist(
    spec: KernelSpec,
    x: np.ndarray,
    cluster_points: np.ndarray,
    self_sim: float | None = None,
) -> float:
    """Squared feature-space distance from x to the mean of a member set.

    kappa(x,x) - (2/|C|) sum kappa(x, c) + (1/|C|^2) sum kappa(c, c'); pass
    `self_sim` to reuse the cached third term.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    cluster_points = np.asarray(cluster_points, dtype=np.float64)
    if cluster_points.ndim == 1:
        cluster_points = cluster_points[:, None]
    if cluster_points.shape[1] == 0:
        raise ValueError("cluster has no members")
    cross = gram(spec, x, cluster_points)
    if self_sim is None:
        self_sim = float(gram(spec, cluster_points, cluster_points).sum()) / cluster_points.shape[1] ** 2
    return float(self_kernel(spec, x)[0] - 2.0 * cross.mean() + self_sim)


def _distances_to_clusters(diag, cross, G, labels, n_clusters):
    """(n, K) kernel distances given cross Gram (n, m) to the member set clustered by labels."""
    m = labels.size
    onehot = np.zeros((m, n_clusters))
    onehot[np.arange(m), labels] = 1.0
    counts = onehot.sum(axis=0)
    safe = np.maximum(counts, 1.0)
    cluster_sums = G @ onehot                   # (m, K)
    sums = cluster_sums if cross is G else cross @ onehot  # (n, K) member sums per cluster
    self_sims = (onehot * cluster_sums).sum(axis=0) / safe**2
    d = diag[:, None] - 2.0 * sums / safe[None, :] + self_sims[None, :]
    d[:, counts == 0] = np.inf
    return d, counts


def kernel_kmeans(
    points: np.ndarray,
    cfg: KMeansConfig,
    spec: KernelSpec,
    seed: SeedLike = 0,
    G: np.ndarray | None = None,
    init_indices: np.ndarray | None = None,
) -> KernelClustering:
    """Lloyd iterations in feature space over the given point columns.

    Starts from K distinct random points as singleton clusters; stops when
    labels stabilize, the objective decrease falls under cfg.tol, or at
    cfg.max_iter. An emptied cluster is re-seeded at the point farthest from
    its own cluster, matching the vector-space rule.
    """
    points = check_matrix(points)
    m = points.shape[1]
    k = cfg.n_clusters
    if k > m:
        raise ValueError(f"n_clusters={k} exceeds the number of points {m}")
    if G is None:
        G = gram(spec, points, points)
    diag = np.diag(G).copy()
    if init_indices is None:
        init_indices = rng_from(seed).choice(m, size=k, replace=False)
    # singleton "centroids": membership overrides used only for the distance step
    seed_members = np.asarray(init_indices)

    rows = np.arange(m)
    labels = None
    prev_labels = None
    prev_obj = None
    obj = np.nan
    iterations = 0
    override = {c: seed_members[c : c + 1] for c in range(k)}
    for _ in range(max(cfg.max_iter, 1)):
        iterations += 1
        if override is not None:
            d = np.empty((m, k))
            for c, mem in override.items():
                block = G[np.ix_(mem, mem)]
                d[:, c] = diag - 2.0 * G[:, mem].mean(axis=1) + block.sum() / mem.size**2
            override = None
        else:
            d, _ = _distances_to_clusters(diag, G, G, labels, k)
        new_labels = d.argmin(axis=1)
        own = d[rows, new_labels]
        obj = float(own.sum())
        if prev_labels is not None and np.array_equal(new_labels, prev_labels):
            labels = new_labels
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k)
        if (counts == 0).any():
            # mirror lloyd_kmeans: farthest point (at assignment time) re-seeds each empty cluster
            override = {}
            far = own.copy()
            for c in range(k):
                if counts[c]:
                    override[c] = np.flatnonzero(labels == c)
                else:
                    j = int(far.argmax())
                    override[c] = np.array([j])
                    far[j] = -np.inf
        if prev_obj is not None and prev_obj > 0 and prev_obj - obj <= cfg.tol * prev_obj:
            break
        prev_labels = labels
        prev_obj = obj
    return KernelClustering(labels=labels, objective=obj, iterations=iterations)


def kernel_kmeans_restarts(
    points: np.ndarray,
    cfg: KMeansConfig,
    spec: KernelSpec,
    seed: SeedLike = 0,
    G: np.ndarray | None = None,
) -> KernelClustering:
    """Minimum-objective kernel clustering over cfg.restarts runs."""
    points = check_matrix(points)
    if G is None:
        G = gram(spec, points, points)
    best = None
    for r in range(cfg.restarts):
        run = kernel_kmeans(points, cfg, spec, spawn(seed, r), G=G)
        if best is None or run.objective < best.objective:
            best = run
    return best


def augment_centroids(
    sketch_points: np.ndarray,
    sketch_labels: np.ndarray,
    n_clusters: int,
    aug_points: np.ndarray,
    spec: KernelSpec,
    G: np.ndarray | None = None,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Attach each extra point to its kernel-nearest sketch cluster.

    Returns (member lists over the combined index space [sketch | extra],
    labels of the extra points). The combined lists define the grown
    clusters whose implicit centroids include the new points.
    """
    sketch_points = check_matrix(sketch_points)
    m = sketch_points.shape[1]
    if aug_points.size == 0:
        members = [np.flatnonzero(sketch_labels == c) for c in range(n_clusters)]
        return members, np.empty(0, dtype=np.int64)
    aug_points = check_matrix(aug_points)
    if G is None:
        G = gram(spec, sketch_points, sketch_points)
    cross = gram(spec, aug_points, sketch_points)
    d, _ = _distances_to_clusters(self_kernel(spec, aug_points), cross, G, sketch_labels, n_clusters)
    aug_labels = d.argmin(axis=1)
    members = []
    for c in range(n_clusters):
        members.append(
            np.concatenate([np.flatnonzero(sketch_labels == c), m + np.flatnonzero(aug_labels == c)])
        )
    return members, aug_labels


def regroup_sketch(
    sketch_points: np.ndarray,
    aug_points: np.ndarray,
    members: list[np.ndarray],
    spec: KernelSpec,
    G_combined: np.ndarray | None = None,
) -> np.ndarray:
    """Reassign each sketch point to the nearest grown cluster (kernel distance)."""
    sketch_points = check_matrix(sketch_points)
    m = sketch_points.shape[1]
    combined = (
        sketch_points
        if aug_points.size == 0
        else np.hstack([sketch_points, check_matrix(aug_points)])
    )
    if G_combined is None:
        G_combined = gram(spec, combined, combined)
    n_clusters = len(members)
    d = np.empty((m, n_clusters))
    diag = np.diag(G_combined)[:m]
    for c, mem in enumerate(members):
        if mem.size == 0:
            d[:, c] = np.inf
            continue
        block_sum = G_combined[np.ix_(mem, mem)].sum()
        d[:, c] = diag - 2.0 * G_combined[:m, mem].mean(axis=1) + block_sum / mem.size**2
    return d.argmin(axis=1)


def assign_by_kernel(
    X: np.ndarray,
    sketch_points: np.ndarray,
    sketch_labels: np.ndarray,
    n_clusters: int,
    spec: KernelSpec,
    G: np.ndarray | None = None,
    block: int = 8192,
) -> np.ndarray:
    """Kernel-nearest cluster for every column of X, streamed in column blocks."""
    X = check_matrix(X)
    if G is None:
        G = gram(spec, sketch_points, sketch_points)
    labels = np.empty(X.shape[1], dtype=np.int64)
    for start in range(0, X.shape[1], block):
        chunk = X[:, start : start + block]
        cross = gram(spec, chunk, sketch_points)
        d, _ = _distances_to_clusters(self_kernel(spec, chunk), cross, G, sketch_labels, n_clusters)
        labels[start : start + block] = d.argmin(axis=1)
    return labels


def _keskeva_draw(X, n_clusters, n_sketch, n_extra, spec, cfg, draw_seed, draw_index):
    t0 = time.perf_counter()
    n_points = X.shape[1]
    sketch = sample_indices(n_points, n_sketch, rng_from(draw_seed, 0))
    pts = X[:, sketch]
    G = gram(spec, pts, pts)
    km = kernel_kmeans_restarts(pts, cfg, spec, spawn(draw_seed, 1), G=G)
    aug = sample_indices(n_points, n_extra, rng_from(draw_seed, 2), exclude=sketch)
    apts = X[:, aug]
    members, _ = augment_centroids(pts, km.labels, n_clusters, apts, spec, G=G)
    if n_extra:
        cross = gram(spec, apts, pts)
        G_comb = np.block([[G, cross.T], [cross, gram(spec, apts, apts)]])
    else:
        G_comb = G
    regrouped = regroup_sketch(pts, apts, members, spec, G_combined=G_comb)
    vn_size = int((regrouped == km.labels).sum())
    counts = np.bincount(km.labels, minlength=n_clusters)
    record = KernelDraw(
        draw=draw_index,
        vn_size=vn_size,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        empty_clusters=int((counts == 0).sum()),
    )
    return record, km, sketch, G


def keskeva(
    X: np.ndarray,
    n_clusters: int,
    n_sketch: int,
    n_extra: int,
    n_draws: int,
    spec: KernelSpec,
    kmeans_cfg: KMeansConfig | None = None,
    seed: SeedLike = 0,
    threads: int = 1,
    block: int = 8192,
) -> KeskevaOutcome:
    """Kernel clustering via competing point sketches.

    The winner is the draw whose sketch kept the most points in place through
    the grow-and-regroup validation (ties to the earliest draw); all columns
    of X are then assigned to the winner's sketch clusters.
    """
    X = check_matrix(X)
    n_points = X.shape[1]
    if n_sketch < 1 or n_sketch > n_points:
        raise ValueError("n_sketch must be in [1, n_points]")
    if n_extra < 0 or n_sketch + n_extra > n_points:
        raise ValueError("n_sketch + n_extra must not exceed the point count")
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    cfg = kmeans_cfg or KMeansConfig(n_clusters)
    if cfg.n_clusters != n_clusters:
        raise ValueError("kmeans_cfg.n_clusters disagrees with n_clusters")
    t0 = time.perf_counter()

    def run(r):
        return _keskeva_draw(X, n_clusters, n_sketch, n_extra, spec, cfg, spawn(seed, r), r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(n_draws)))
    else:
        results = [run(r) for r in range(n_draws)]

    winner = max(range(n_draws), key=lambda r: (results[r][0].vn_size, -r))
    _, km, sketch, G = results[winner]
    labels = assign_by_kernel(X, X[:, sketch], km.labels, n_clusters, spec, G=G, block=block)
    return KeskevaOutcome(
        labels=labels,
        sketch_idx=sketch,
        sketch_labels=km.labels,
        winner=winner,
        trace=[res[0] for res in results],
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )


def centroid_coefficients(labels: np.ndarray, n_clusters: int) -> np.ndarray:
    """Coefficient matrix B with column k equal to indicator(cluster k)/|C_k|.

    The implicit centroid of cluster k is the feature map of the members times
    b_k; empty clusters yield zero columns.
    """
    labels = np.asarray(labels)
    B = np.zeros((labels.size, n_clusters))
    for c in range(n_clusters):
        members = labels == c
        count = int(members.sum())
        if count:
            B[members, c] = 1.0 / count
    return B


def coeff_distance(G: np.ndarray, cross: np.ndarray, self_value: float, coeffs: np.ndarray) -> float:
    """Squared feature-space distance to a coefficient-space centroid.

    kappa(x,x) - 2 b'k + b'Kb for the kernel matrix K over the support set,
    cross vector k of kernel values against x, and coefficient vector b
    (a column of B, or B @ pi for a soft assignment pi).
    """
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1)
    cross = np.asarray(cross, dtype=np.float64).reshape(-1)
    if coeffs.size != cross.size or G.shape != (coeffs.size, coeffs.size):
        raise ValueError("inconsistent shapes for coefficient distance")
    return float(self_value - 2.0 * (coeffs @ cross) + coeffs @ G @ coeffs)
