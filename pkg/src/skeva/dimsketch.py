"""Dimension sketching: cluster on a few random rows, validate with a few more.

Each draw clusters all points on a small random subset of features, then
checks how many points keep their cluster assignment when extra features are
appended (with centroids extended by the per-cluster means of the new
features). Draws compete on a rank score of that validation set; the winner's
sketch clustering labels the full data. The batch variant appends all extra
features at once; the sequential variant appends them one at a time so it can
abandon a draw early (bail-out) or stop augmenting once the score flattens.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .data import check_matrix, sample_indices
from .kmeans import Clustering, KMeansConfig, best_of_restarts
from .rng import SeedLike, rng_from, spawn

RANK_FUNCTIONS = ("cardinality", "fdr_weighted")


@dataclass
class DimDraw:
    """Per-draw trace row."""

    draw: int
    score: float
    vd_size: int
    fdr: float
    wall_ms: float
    aug_steps: int | None = None   # sequential variant: augmentations actually performed
    bailed: bool = False
    gradient_stop: bool = False
    empty_clusters: int = 0


@dataclass
class SketchOutcome:
    clustering: Clustering         # labels cover all points; centroids live in the sketch dims
    sketch_idx: np.ndarray         # winning draw's feature indices
    winner: int
    trace: list[DimDraw] = field(default_factory=list)
    distance_ops: int = 0          # point-to-centroid coordinate ops across the whole run
    wall_ms: float = 0.0


def extend_centroids(
    X: np.ndarray, labels: np.ndarray, n_clusters: int, aug_idx: np.ndarray
) -> np.ndarray:
    """Per-cluster means of the `aug_idx` features: shape (len(aug_idx), K).

    Empty clusters get zero columns.
    """
    rows = np.asarray(aug_idx, dtype=np.int64)
    out = np.zeros((rows.size, n_clusters))
    if rows.size == 0:
        return out
    XA = X[rows]
    for k in range(n_clusters):
        members = labels == k
        if members.any():
            out[:, k] = XA[:, members].mean(axis=1)
    return out


def validation_set_dims(
    X: np.ndarray,
    sketch_idx: np.ndarray,
    labels: np.ndarray,
    centroids: np.ndarray,
    aug_idx: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points whose nearest centroid is unchanged after appending aug_idx features.

    Returns (validation point indices, labels in the augmented space, extended
    centroid block). `centroids` are the sketch-space centroids, (|sketch|, K).
    """
    n_clusters = centroids.shape[1]
    aug_c = extend_centroids(X, labels, n_clusters, aug_idx)
    d = cdist(np.ascontiguousarray(X[sketch_idx].T), np.ascontiguousarray(centroids.T), "sqeuclidean")
    if len(aug_idx):
        d = d + cdist(np.ascontiguousarray(X[aug_idx].T), np.ascontiguousarray(aug_c.T), "sqeuclidean")
    aug_labels = d.argmin(axis=1)
    return np.flatnonzero(aug_labels == labels), aug_labels, aug_c


def fdr(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    """Fisher's discriminant ratio over cluster pairs.

    Sum over ordered pairs (k1, k2 != k1) of squared centroid distance over
    the two unbiased within-cluster variances. Single-member clusters count
    as zero variance; a zero denominator with separated centroids yields inf.
    """
    n_clusters = centroids.shape[1]
    variances = np.zeros(n_clusters)
    for k in range(n_clusters):
        members = labels == k
        count = int(members.sum())
        if count > 1:
            sq = ((points[:, members] - centroids[:, [k]]) ** 2).sum()
            variances[k] = sq / (count - 1)
    cen_sq = cdist(np.ascontiguousarray(centroids.T), np.ascontiguousarray(centroids.T), "sqeuclidean")
    return _fdr_from_parts(cen_sq, variances)


def _fdr_from_parts(cen_sq: np.ndarray, variances: np.ndarray) -> float:
    total = 0.0
    k = variances.size
    for k1 in range(k):
        for k2 in range(k):
            if k1 == k2:
                continue
            den = variances[k1] + variances[k2]
            if den == 0.0:
                if cen_sq[k1, k2] > 0.0:
                    return math.inf
                continue
            total += cen_sq[k1, k2] / den
    return total


def rank_score(vd_size: int, fdr_value: float, kind: str = "fdr_weighted") -> float:
    """Score of a draw given its validation-set size and Fisher ratio."""
    if kind == "cardinality":
        return float(vd_size)
    if kind == "fdr_weighted":
        if fdr_value < 0:
            raise ValueError("fdr_value must be non-negative")
        if fdr_value == 0.0:
            return 0.0
        if math.isinf(fdr_value):
            return float(vd_size)
        return vd_size * math.exp(-1.0 / fdr_value)
    raise ValueError(f"unknown rank function {kind!r}; pick one of {RANK_FUNCTIONS}")


def _check_sketch_args(n_features, n_sketch, n_extra, n_draws):
    if n_sketch < 1:
        raise ValueError("n_sketch must be at least 1")
    if n_sketch >= n_features:
        raise ValueError(f"n_sketch={n_sketch} must be smaller than the feature count {n_features}")
    if n_extra < 0 or n_sketch + n_extra > n_features:
        raise ValueError(f"n_sketch + n_extra must not exceed the feature count {n_features}")
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")


def _sketch_kmeans(XT, n_sketch, cfg, draw_seed):
    """Sample sketch dims and cluster on them; shared by both variants."""
    n_features = XT.shape[1]
    sketch = sample_indices(n_features, n_sketch, rng_from(draw_seed, 0))
    XTs = np.ascontiguousarray(XT[:, sketch])
    km = best_of_restarts(XTs.T, cfg, spawn(draw_seed, 1), keep_distances=True)
    return sketch, XTs, km


def _cluster_variances(dists, labels, counts):
    k = counts.size
    variances = np.zeros(k)
    for c in range(k):
        if counts[c] > 1:
            variances[c] = dists[labels == c, c].sum() / (counts[c] - 1)
    return variances


def _batch_draw(XT, n_sketch, n_extra, cfg, rank, draw_seed, draw_index):
    t0 = time.perf_counter()
    n_points = XT.shape[0]
    k = cfg.n_clusters
    sketch, XTs, km = _sketch_kmeans(XT, n_sketch, cfg, draw_seed)
    ops = km.assign_ops
    labels = km.labels
    counts = np.bincount(labels, minlength=k)

    aug = sample_indices(XT.shape[1], n_extra, rng_from(draw_seed, 2), exclude=sketch)
    if n_extra:
        XTa = np.ascontiguousarray(XT[:, aug])
        aug_c = np.zeros((k, n_extra))
        for c in range(k):
            if counts[c]:
                aug_c[c] = XTa[labels == c].mean(axis=0)
        total = km.point_dists + cdist(XTa, aug_c, "sqeuclidean")
        ops += n_points * k * n_extra
        cc = np.hstack([km.centroids.T, aug_c])
    else:
        total = km.point_dists
        cc = km.centroids.T
    aug_labels = total.argmin(axis=1)
    vd_size = int((aug_labels == labels).sum())

    cen_sq = cdist(cc, cc, "sqeuclidean")
    fdr_value = _fdr_from_parts(cen_sq, _cluster_variances(total, labels, counts))
    score = rank_score(vd_size, fdr_value, rank)
    record = DimDraw(
        draw=draw_index,
        score=score,
        vd_size=vd_size,
        fdr=fdr_value,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        empty_clusters=int((counts == 0).sum()),
    )
    return record, km, sketch, ops


def skeva_batch(
    X: np.ndarray,
    n_clusters: int,
    n_sketch: int,
    n_extra: int,
    n_draws: int,
    seed: SeedLike = 0,
    rank: str = "fdr_weighted",
    kmeans_cfg: KMeansConfig | None = None,
    threads: int = 1,
) -> SketchOutcome:
    """Run `n_draws` independent sketch draws and label the data by the best one.

    Draw r is a pure function of (seed, r), so draws may run on several
    threads without changing the result; the winner is the highest score with
    ties to the earliest draw.
    """
    X = check_matrix(X)
    _check_sketch_args(X.shape[0], n_sketch, n_extra, n_draws)
    cfg = kmeans_cfg or KMeansConfig(n_clusters)
    if cfg.n_clusters != n_clusters:
        raise ValueError("kmeans_cfg.n_clusters disagrees with n_clusters")
    t0 = time.perf_counter()
    XT = np.ascontiguousarray(X.T)

    def run(r):
        return _batch_draw(XT, n_sketch, n_extra, cfg, rank, spawn(seed, r), r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(n_draws)))
    else:
        results = [run(r) for r in range(n_draws)]

    winner = max(range(n_draws), key=lambda r: (results[r][0].score, -r))
    record, km, sketch, _ = results[winner]
    km.point_dists = None
    return SketchOutcome(
        clustering=km,
        sketch_idx=sketch,
        winner=winner,
        trace=[res[0] for res in results],
        distance_ops=sum(res[3] for res in results),
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )


def _sequential_trajectory(XT, n_sketch, n_extra, cfg, rank, draw_seed, draw_index, f_best, grad_tol, gradient_mode):
    """One sequential draw: augment one feature at a time, scoring as we go.

    `f_best` is the bail-out bound (use -inf to disable, e.g. when trajectories
    are replayed later). Returns (record, km, sketch, ops, scores).
    """
    t0 = time.perf_counter()
    n_points, n_features = XT.shape
    k = cfg.n_clusters
    sketch, XTs, km = _sketch_kmeans(XT, n_sketch, cfg, draw_seed)
    ops = km.assign_ops
    labels = km.labels
    counts = np.bincount(labels, minlength=k)
    empty = int((counts == 0).sum())

    # pre-shuffled complement pool: taking its prefix one element at a time is
    # uniform sampling without replacement
    pool = np.setdiff1d(np.arange(n_features, dtype=np.int64), sketch)
    pool = rng_from(draw_seed, 2).permutation(pool)

    sketch_dists = km.point_dists
    cen_sq = cdist(km.centroids.T, km.centroids.T, "sqeuclidean")
    f_prev = rank_score(n_points, _fdr_from_parts(cen_sq, _cluster_variances(sketch_dists, labels, counts)), rank)

    aug_dist = np.zeros_like(sketch_dists)
    score = f_prev
    vd_size = n_points
    fdr_value = math.nan
    scores: list[float] = []
    steps = 0
    bailed = False
    gradient_stop = False
    for j in range(min(n_extra, pool.size)):
        row = XT[:, pool[j]]
        aug_c = np.zeros(k)
        for c in range(k):
            if counts[c]:
                aug_c[c] = row[labels == c].mean()
        aug_dist += (row[:, None] - aug_c[None, :]) ** 2
        ops += n_points * k
        total = sketch_dists + aug_dist
        aug_labels = total.argmin(axis=1)
        vd_size = int((aug_labels == labels).sum())
        cen_sq += (aug_c[:, None] - aug_c[None, :]) ** 2
        fdr_value = _fdr_from_parts(cen_sq, _cluster_variances(total, labels, counts))
        score = rank_score(vd_size, fdr_value, rank)
        scores.append(score)
        steps = j + 1
        if score < f_best:
            bailed = True
            break
        if abs(score - f_prev) <= grad_tol:
            if gradient_mode == "accept":
                gradient_stop = True
            else:  # "abort": treat a flat score like a failed draw
                bailed = True
            break
        f_prev = score

    record = DimDraw(
        draw=draw_index,
        score=score,
        vd_size=vd_size,
        fdr=fdr_value,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        aug_steps=steps,
        bailed=bailed,
        gradient_stop=gradient_stop,
        empty_clusters=empty,
    )
    return record, km, sketch, ops, scores


def skeva_sequential(
    X: np.ndarray,
    n_clusters: int,
    n_sketch: int,
    n_extra: int,
    n_draws: int,
    seed: SeedLike = 0,
    grad_tol: float = 0.0,
    rank: str = "fdr_weighted",
    kmeans_cfg: KMeansConfig | None = None,
    gradient_mode: str = "accept",
    threads: int = 1,
) -> SketchOutcome:
    """Sequential variant: per draw, features are appended one at a time.

    A draw whose running score drops below the best accepted score so far is
    abandoned (bail-out); once the score changes by at most `grad_tol` between
    consecutive augmentations the draw stops augmenting early and competes
    with its current score (`gradient_mode="abort"` instead discards it, which
    mirrors a stricter reading of the stopping rule). With threads > 1 every
    draw computes its full trajectory and the bail-out recursion is replayed
    in draw order, which reproduces the sequential result exactly at the cost
    of skipping the bail-out savings.
    """
    X = check_matrix(X)
    _check_sketch_args(X.shape[0], n_sketch, n_extra, n_draws)
    if grad_tol < 0:
        raise ValueError("grad_tol must be non-negative")
    if gradient_mode not in ("accept", "abort"):
        raise ValueError("gradient_mode must be 'accept' or 'abort'")
    cfg = kmeans_cfg or KMeansConfig(n_clusters)
    if cfg.n_clusters != n_clusters:
        raise ValueError("kmeans_cfg.n_clusters disagrees with n_clusters")
    t0 = time.perf_counter()
    XT = np.ascontiguousarray(X.T)

    trace: list[DimDraw] = []
    ops = 0
    f_best = -math.inf
    winner = None
    best = None
    if threads > 1:
        def run(r):
            return _sequential_trajectory(
                XT, n_sketch, n_extra, cfg, rank, spawn(seed, r), r, -math.inf, grad_tol, gradient_mode
            )

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(n_draws)))
        for r, (record, km, sketch, draw_ops, scores) in enumerate(results):
            ops += draw_ops
            # replay the bail-out recursion in draw order
            for j, s in enumerate(scores):
                if s < f_best:
                    record.bailed = True
                    record.gradient_stop = False
                    record.aug_steps = j + 1
                    record.score = s
                    break
            trace.append(record)
            if not record.bailed and record.score > f_best:
                f_best = record.score
                winner = r
                best = (km, sketch)
    else:
        for r in range(n_draws):
            record, km, sketch, draw_ops, _ = _sequential_trajectory(
                XT, n_sketch, n_extra, cfg, rank, spawn(seed, r), r, f_best, grad_tol, gradient_mode
            )
            ops += draw_ops
            trace.append(record)
            if not record.bailed and record.score > f_best:
                f_best = record.score
                winner = r
                best = (km, sketch)

    if best is None:
        # every draw bailed; fall back to the first draw's sketch clustering
        record, km, sketch, draw_ops, _ = _sequential_trajectory(
            XT, n_sketch, 0, cfg, rank, spawn(seed, 0), 0, -math.inf, grad_tol, gradient_mode
        )
        winner = 0
        best = (km, sketch)
    km, sketch = best
    km.point_dists = None
    return SketchOutcome(
        clustering=km,
        sketch_idx=sketch,
        winner=winner,
        trace=trace,
        distance_ops=ops,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )
