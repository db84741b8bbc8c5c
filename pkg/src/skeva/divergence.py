"""Divergence-guided draw selection: no clustering until the final draw.

A draw of points (or of feature rows) is summarized by a Parzen density
estimate: a uniform mixture of Gaussian kernels centered at the drawn,
mean-centered samples. Draws are screened with the Cauchy-Schwarz divergence,
which has a closed form for Gaussian mixtures because the integral of a
product of two Gaussian kernels is the same kernel with doubled covariance.
A draw must (1) differ enough from the degenerate single-kernel-at-origin
estimate and (2) barely move when extra samples are appended. The surviving
draw is clustered once and labels the whole data set.

All divergence sums run in the log domain; the kernel normalizers cancel in
the divergence and are left out, which keeps the values finite at any
dimension.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .data import center_columns, check_matrix, sample_indices
from .kmeans import Clustering, KMeansConfig, best_of_restarts
from .rng import SeedLike, rng_from, spawn


@dataclass(frozen=True)
class ParzenMixture:
    """Uniform mixture of Gaussian kernels (covariance var * I) at the support columns."""

    support: np.ndarray
    var: float

    def __post_init__(self):
        object.__setattr__(self, "support", check_matrix(self.support))
        if self.var <= 0:
            raise ValueError("var must be positive")

    @property
    def dim(self) -> int:
        return self.support.shape[0]

    @property
    def size(self) -> int:
        return self.support.shape[1]


def origin_mixture(dim: int, var: float) -> ParzenMixture:
    """The degenerate reference estimate: one kernel at the origin."""
    return ParzenMixture(np.zeros((dim, 1)), var)


def _log_mean_kernel(P: np.ndarray, Q: np.ndarray, var: float) -> float:
    # log of the mean doubled-bandwidth kernel over all support pairs, with the
    # dimension-dependent normalizer dropped (it cancels in the divergence)
    sq = cdist(np.ascontiguousarray(P.T), np.ascontiguousarray(Q.T), "sqeuclidean")
    return float(logsumexp(-sq / (4.0 * var))) - math.log(P.shape[1] * Q.shape[1])


def cs_divergence(p: ParzenMixture, q: ParzenMixture) -> float:
    """Cauchy-Schwarz divergence between two Gaussian Parzen mixtures.

    -log of the squared normalized inner product of the two densities,
    evaluated in closed form. Non-negative; exactly zero for identical
    supports.
    """
    if p.dim != q.dim:
        raise ValueError(f"mixture dimensions differ: {p.dim} vs {q.dim}")
    if p.var != q.var:
        raise ValueError("mixtures must share the kernel bandwidth")
    cross = _log_mean_kernel(p.support, q.support, p.var)
    pp = _log_mean_kernel(p.support, p.support, p.var)
    qq = _log_mean_kernel(q.support, q.support, q.var)
    return -2.0 * cross + pp + qq


def cs_divergence_to_origin(p: ParzenMixture) -> float:
    """Divergence from the single-kernel-at-origin reference estimate."""
    return cs_divergence(p, origin_mixture(p.dim, p.var))


def zero_pad_mixture(p: ParzenMixture, extra: int) -> ParzenMixture:
    """Append `extra` zero coordinates to every support point (bandwidth unchanged)."""
    if extra < 0:
        raise ValueError("extra must be non-negative")
    if extra == 0:
        return p
    return replace(p, support=np.vstack([p.support, np.zeros((extra, p.size))]))


def num_draws(p_success: float, q_informative: float, per_draw: int) -> int:
    """Draw count so that at least one draw is all-informative with probability p.

    Independent draws of `per_draw` samples, each sample informative with
    probability q, give 1 - p = (1 - q)^(m R); solve for R and round up.
    """
    if not 0.0 < p_success < 1.0:
        raise ValueError("p_success must lie strictly between 0 and 1")
    if not 0.0 < q_informative < 1.0:
        raise ValueError("q_informative must lie strictly between 0 and 1")
    if per_draw < 1:
        raise ValueError("per_draw must be at least 1")
    r = math.log1p(-p_success) / (per_draw * math.log1p(-q_informative))
    return max(1, math.ceil(r))


@dataclass
class DivergenceDraw:
    draw: int
    div_origin: float
    div_augment: float | None
    accepted: bool
    r_star: int | None   # running winner after this draw


@dataclass
class DivergenceOutcome:
    clustering: Clustering
    selected: np.ndarray           # winning point or row indices
    winner: int | None             # None when no draw passed and the first was used
    fallback: bool
    trace: list[DivergenceDraw] = field(default_factory=list)
    div_max: float = 0.0
    div_min: float = math.inf
    wall_ms: float = 0.0


def _check_divergence_args(total, n_sketch, n_extra, n_draws):
    if n_sketch < 1:
        raise ValueError("n_sketch must be at least 1")
    if n_extra < 0 or n_sketch + n_extra > total:
        raise ValueError(f"n_sketch + n_extra must not exceed {total}")
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")


def _select(evaluate, n_draws, threads):
    """Run the two-check threshold recursion over draws, optionally precomputing in parallel.

    `evaluate(r)` -> (div1, div2, selected); the thresholds adapt: a draw is
    explored further only if div1 beats every accepted draw's div1 so far, and
    accepted only if div2 undercuts every accepted div2. With threads > 1 all
    draws evaluate both checks eagerly and the recursion is replayed in draw
    order, reproducing the sequential selection.
    """
    div_max, div_min = 0.0, math.inf
    winner, chosen = None, None
    trace = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, range(n_draws)))
        for r, (div1, div2, selected) in enumerate(results):
            accepted = False
            shown2 = None
            if div1 > div_max:
                shown2 = div2
                if div2 < div_min:
                    div_max, div_min = div1, div2
                    winner, chosen = r, selected
                    accepted = True
            trace.append(DivergenceDraw(r, div1, shown2, accepted, winner))
    else:
        for r in range(n_draws):
            div1, div2, selected = evaluate(r, need_second=lambda d1: d1 > div_max)
            accepted = False
            if div1 > div_max and div2 is not None and div2 < div_min:
                div_max, div_min = div1, div2
                winner, chosen = r, selected
                accepted = True
            trace.append(DivergenceDraw(r, div1, div2, accepted, winner))
    return winner, chosen, trace, div_max, div_min


def diskeva_points(
    X: np.ndarray,
    n_clusters: int,
    n_sketch: int,
    n_extra: int,
    n_draws: int,
    var: float = 1.0,
    kmeans_cfg: KMeansConfig | None = None,
    seed: SeedLike = 0,
    second_ref: str = "holdout",
    threads: int = 1,
) -> DivergenceOutcome:
    """Point-sketch selection by divergence, one K-means run at the end.

    Per draw: center a random sample of n_sketch columns and keep it only if
    its density estimate diverges from the origin reference more than any
    accepted draw; then draw n_extra held-out columns and accept if the
    augmented estimate stays closer (to the held-out estimate by default,
    `second_ref="sketch"` compares against the sketch estimate instead) than
    any accepted draw managed. K-means runs once on the winner's raw columns
    and its centroids label all points. If nothing passes both checks, the
    first draw's sample is used and `fallback` is set.
    """
    X = check_matrix(X)
    n_points = X.shape[1]
    _check_divergence_args(n_points, n_sketch, n_extra, n_draws)
    if second_ref not in ("holdout", "sketch"):
        raise ValueError("second_ref must be 'holdout' or 'sketch'")
    cfg = kmeans_cfg or KMeansConfig(n_clusters)
    if cfg.n_clusters != n_clusters:
        raise ValueError("kmeans_cfg.n_clusters disagrees with n_clusters")
    t0 = time.perf_counter()

    def evaluate(r, need_second=lambda d1: True):
        sketch = sample_indices(n_points, n_sketch, rng_from(spawn(seed, r), 0))
        centered = center_columns(X[:, sketch])
        p_sketch = ParzenMixture(centered, var)
        div1 = cs_divergence_to_origin(p_sketch)
        if not need_second(div1):
            return div1, None, sketch
        if n_extra == 0:
            return div1, 0.0, sketch  # augmenting by nothing moves the estimate by nothing
        extra = sample_indices(n_points, n_extra, rng_from(spawn(seed, r), 1), exclude=sketch)
        held = ParzenMixture(center_columns(X[:, extra]), var)
        augmented = ParzenMixture(np.hstack([p_sketch.support, held.support]), var)
        reference = held if second_ref == "holdout" else p_sketch
        div2 = cs_divergence(augmented, reference)
        return div1, div2, sketch

    winner, chosen, trace, div_max, div_min = _select(evaluate, n_draws, threads)
    fallback = winner is None
    if fallback:
        chosen = sample_indices(n_points, n_sketch, rng_from(spawn(seed, 0), 0))
    km = best_of_restarts(X[:, chosen], cfg, spawn(seed, n_draws))
    d = cdist(np.ascontiguousarray(X.T), np.ascontiguousarray(km.centroids.T), "sqeuclidean")
    labels = d.argmin(axis=1)
    clustering = Clustering(
        labels=labels,
        centroids=km.centroids,
        objective=float(d[np.arange(n_points), labels].sum()),
        iterations=km.iterations,
        assign_ops=km.assign_ops + labels.size * n_clusters * X.shape[0],
    )
    return DivergenceOutcome(
        clustering=clustering,
        selected=chosen,
        winner=winner,
        fallback=fallback,
        trace=trace,
        div_max=div_max,
        div_min=div_min,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )


def diskeva_dims(
    X: np.ndarray,
    n_clusters: int,
    n_sketch: int,
    n_extra: int,
    n_draws: int,
    var: float = 1.0,
    kmeans_cfg: KMeansConfig | None = None,
    seed: SeedLike = 0,
    threads: int = 1,
) -> DivergenceOutcome:
    """Feature-sketch selection by divergence, one K-means run at the end.

    Per draw: restrict all points to n_sketch random rows, center, and screen
    against the origin reference; then append n_extra more rows and accept if
    the augmented estimate stays close to the zero-padded sketch estimate
    (padding aligns the dimensions; the divergence is unchanged by padding
    both sides equally). The winner's rows host a single K-means whose labels
    are the full-data labels.
    """
    X = check_matrix(X)
    n_features = X.shape[0]
    _check_divergence_args(n_features, n_sketch, n_extra, n_draws)
    cfg = kmeans_cfg or KMeansConfig(n_clusters)
    if cfg.n_clusters != n_clusters:
        raise ValueError("kmeans_cfg.n_clusters disagrees with n_clusters")
    t0 = time.perf_counter()

    def evaluate(r, need_second=lambda d1: True):
        rows = sample_indices(n_features, n_sketch, rng_from(spawn(seed, r), 0))
        sketch = ParzenMixture(center_columns(X[rows]), var)
        div1 = cs_divergence_to_origin(sketch)
        if not need_second(div1):
            return div1, None, rows
        extra = sample_indices(n_features, n_extra, rng_from(spawn(seed, r), 1), exclude=rows)
        stacked = ParzenMixture(
            np.vstack([sketch.support, center_columns(X[extra])]), var
        )
        padded = zero_pad_mixture(sketch, n_extra)
        div2 = cs_divergence(stacked, padded)
        return div1, div2, rows

    winner, chosen, trace, div_max, div_min = _select(evaluate, n_draws, threads)
    fallback = winner is None
    if fallback:
        chosen = sample_indices(n_features, n_sketch, rng_from(spawn(seed, 0), 0))
    clustering = best_of_restarts(X[chosen], cfg, spawn(seed, n_draws))
    return DivergenceOutcome(
        clustering=clustering,
        selected=chosen,
        winner=winner,
        fallback=fallback,
        trace=trace,
        div_max=div_max,
        div_min=div_min,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )
