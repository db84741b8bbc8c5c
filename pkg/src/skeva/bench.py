"""Synthetic data model, accuracy scoring, the random-projection baseline, and
the experiment harness that compares every method against full K-means.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import check_matrix, load_dense
from .dimsketch import skeva_batch, skeva_sequential
from .divergence import diskeva_dims, diskeva_points
from .kernels import parse_kernel
from .kernelsketch import keskeva, kernel_kmeans_restarts
from .kmeans import Clustering, KMeansConfig, best_of_restarts
from .rng import SeedLike, rng_from, spawn


@dataclass(frozen=True)
class SynthSpec:
    """Gaussian clusters around means drawn from a hypercube.

    Cluster k contributes exactly n_points/n_clusters points m_k + G_k v with
    v standard normal; G_k is a (n_features, rank) factor of unit-variance
    entries scaled by 1/sqrt(rank), so the per-cluster covariance has `rank`
    non-zero eigenvalues. rank = n_features uses the identity factor. The
    default hypercube side 5*sqrt(rank) keeps clusters well separated at unit
    noise.
    """

    n_features: int
    n_points: int
    n_clusters: int
    rank: int | None = None                 # None: full rank
    hypercube_side: float | None = None     # None: 5 * sqrt(rank)
    seed: int = 0

    def __post_init__(self):
        if self.n_points % self.n_clusters != 0:
            raise ValueError("n_points must be an integer multiple of n_clusters")
        r = self.resolved_rank
        if not 1 <= r <= self.n_features:
            raise ValueError(f"rank must lie in [1, {self.n_features}]")

    @property
    def resolved_rank(self) -> int:
        return self.n_features if self.rank is None else self.rank

    @property
    def resolved_side(self) -> float:
        if self.hypercube_side is not None:
            return self.hypercube_side
        return 5.0 * math.sqrt(self.resolved_rank)


def gen_synthetic(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    """Data matrix (n_features, n_points) and ground-truth labels, deterministic in spec.seed."""
    rng = rng_from(spec.seed)
    d, n, k = spec.n_features, spec.n_points, spec.n_clusters
    rank = spec.resolved_rank
    means = rng.uniform(0.0, spec.resolved_side, size=(d, k))
    per = n // k
    X = np.empty((d, n))
    for c in range(k):
        cols = slice(c * per, (c + 1) * per)
        if rank == d:
            X[:, cols] = means[:, [c]] + rng.normal(size=(d, per))
        else:
            factor = rng.normal(size=(d, rank)) / math.sqrt(rank)
            X[:, cols] = means[:, [c]] + factor @ rng.normal(size=(rank, per))
    return X, np.repeat(np.arange(k), per)


def relative_accuracy(pred: np.ndarray, ref: np.ndarray, n_clusters: int) -> float:
    """Largest fraction of agreeing points over all bijective relabelings.

    Solved exactly as a linear assignment on the confusion matrix.
    """
    pred = np.asarray(pred)
    ref = np.asarray(ref)
    if pred.shape != ref.shape:
        raise ValueError("label vectors must have equal length")
    if pred.size == 0:
        raise ValueError("label vectors are empty")
    if pred.min() < 0 or ref.min() < 0 or pred.max() >= n_clusters or ref.max() >= n_clusters:
        raise ValueError(f"labels must lie in [0, {n_clusters})")
    confusion = np.zeros((n_clusters, n_clusters))
    np.add.at(confusion, (pred, ref), 1.0)
    rows, cols = linear_sum_assignment(-confusion)
    return float(confusion[rows, cols].sum()) / pred.size


def rp_kmeans_baseline(
    X: np.ndarray,
    n_dims: int,
    cfg: KMeansConfig,
    seed: SeedLike = 0,
    identity: bool = False,
) -> Clustering:
    """K-means after a sign random projection to n_dims rows.

    The projection matrix has i.i.d. +-1/sqrt(n_dims) entries. `identity`
    swaps in the identity map (n_dims must equal the feature count), which
    reduces the baseline to plain K-means for debugging.
    """
    X = check_matrix(X)
    d = X.shape[0]
    if not 1 <= n_dims <= d:
        raise ValueError(f"n_dims must lie in [1, {d}]")
    if identity:
        if n_dims != d:
            raise ValueError("identity projection requires n_dims equal to the feature count")
        projected = X
    else:
        signs = rng_from(spawn(seed, 0)).integers(0, 2, size=(n_dims, d)) * 2 - 1
        projected = (signs / math.sqrt(n_dims)) @ X
    return best_of_restarts(projected, cfg, spawn(seed, 1))


METHODS = ("kmeans", "skeva", "seskeva", "keskeva", "diskeva-n", "diskeva-d", "rp")


@dataclass(frozen=True)
class ExperimentConfig:
    methods: tuple[str, ...]
    grid: tuple[int, ...]
    runs: int
    n_clusters: int
    seed: int = 0
    synth: SynthSpec | None = None
    data_path: str | None = None
    data_format: str = "csv"
    points_as: str = "rows"
    n_extra_dims: int = 100
    n_extra_points: int = 100
    n_draws: int = 10
    restarts: int = 5
    max_iter: int = 300
    tol: float = 1e-6
    kernel: str = "linear"
    var: float = 1.0
    rank_fn: str = "fdr_weighted"
    grad_tol: float = 0.0
    threads: int = 1

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; known methods: {', '.join(METHODS)}")
        if self.synth is None and self.data_path is None:
            raise ValueError("either a synthetic spec or a dataset path is required")


@dataclass
class ExperimentRow:
    method: str
    grid: int | None
    run: int
    relative_accuracy: float | None
    truth_accuracy: float | None
    wall_ms: float


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list[ExperimentRow] = field(default_factory=list)

    def summary(self) -> dict:
        """Medians and quartiles per (method, grid) cell."""
        groups: dict = {}
        for row in self.rows:
            groups.setdefault((row.method, row.grid), []).append(row)
        cells = []
        for (method, grid), rows in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0)):
            accs = [r.relative_accuracy for r in rows if r.relative_accuracy is not None]
            times = [r.wall_ms for r in rows]
            cell = {
                "method": method,
                "grid": grid,
                "runs": len(rows),
                "wall_ms": _quartiles(times),
            }
            if accs:
                cell["relative_accuracy"] = _quartiles(accs)
            truth = [r.truth_accuracy for r in rows if r.truth_accuracy is not None]
            if truth:
                cell["truth_accuracy"] = _quartiles(truth)
            cells.append(cell)
        return {"runs": self.config.runs, "seed": self.config.seed, "cells": cells}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "grid", "run", "relative_accuracy", "truth_accuracy", "wall_ms"])
            for r in self.rows:
                writer.writerow([
                    r.method,
                    "" if r.grid is None else r.grid,
                    r.run,
                    "" if r.relative_accuracy is None else f"{r.relative_accuracy:.6f}",
                    "" if r.truth_accuracy is None else f"{r.truth_accuracy:.6f}",
                    f"{r.wall_ms:.3f}",
                ])

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _quartiles(values):
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    return {"q1": float(q1), "median": float(med), "q3": float(q3)}


def _run_cell(method, X, grid_value, cfg, config, cell_seed):
    k = config.n_clusters
    if method == "skeva":
        out = skeva_batch(
            X, k, grid_value, config.n_extra_dims, config.n_draws, cell_seed,
            rank=config.rank_fn, kmeans_cfg=cfg, threads=config.threads,
        )
        return out.clustering.labels
    if method == "seskeva":
        out = skeva_sequential(
            X, k, grid_value, config.n_extra_dims, config.n_draws, cell_seed,
            grad_tol=config.grad_tol, rank=config.rank_fn, kmeans_cfg=cfg, threads=config.threads,
        )
        return out.clustering.labels
    if method == "keskeva":
        spec = parse_kernel(config.kernel, X.shape[0])
        out = keskeva(
            X, k, grid_value, config.n_extra_points, config.n_draws, spec,
            kmeans_cfg=cfg, seed=cell_seed, threads=config.threads,
        )
        return out.labels
    if method == "diskeva-n":
        out = diskeva_points(
            X, k, grid_value, config.n_extra_points, config.n_draws, config.var,
            kmeans_cfg=cfg, seed=cell_seed, threads=config.threads,
        )
        return out.clustering.labels
    if method == "diskeva-d":
        out = diskeva_dims(
            X, k, grid_value, config.n_extra_dims, config.n_draws, config.var,
            kmeans_cfg=cfg, seed=cell_seed, threads=config.threads,
        )
        return out.clustering.labels
    if method == "rp":
        return rp_kmeans_baseline(X, grid_value, cfg, cell_seed).labels
    raise ValueError(f"unknown method {method!r}")


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Every (method, grid point, run) cell, scored against full K-means per run.

    The reference clustering (plain K-means, and kernel K-means when a kernel
    sketch method is on the menu) is computed once per run and its own timing
    is reported under method "kmeans". Deterministic given config.seed.
    """
    cfg = KMeansConfig(
        config.n_clusters, max_iter=config.max_iter, restarts=config.restarts, tol=config.tol
    )
    report = ExperimentReport(config)
    fixed_data = None
    if config.data_path is not None:
        fixed_data = load_dense(config.data_path, fmt=config.data_format, points_as=config.points_as)

    for run in range(config.runs):
        if fixed_data is not None:
            X, truth = fixed_data, None
        else:
            run_seed = int(spawn(config.seed, run, 0).generate_state(1, np.uint64)[0] >> 1)
            X, truth = gen_synthetic(replace(config.synth, seed=run_seed))

        t0 = time.perf_counter()
        reference = best_of_restarts(X, cfg, spawn(config.seed, run, 1))
        ref_ms = (time.perf_counter() - t0) * 1e3
        report.rows.append(ExperimentRow(
            "kmeans", None, run, 1.0,
            None if truth is None else relative_accuracy(reference.labels, truth, config.n_clusters),
            ref_ms,
        ))

        kernel_reference = None
        if "keskeva" in config.methods:
            spec = parse_kernel(config.kernel, X.shape[0])
            t0 = time.perf_counter()
            kernel_reference = kernel_kmeans_restarts(X, cfg, spec, spawn(config.seed, run, 2))
            report.rows.append(ExperimentRow(
                "kernel-kmeans", None, run, 1.0,
                None if truth is None else relative_accuracy(kernel_reference.labels, truth, config.n_clusters),
                (time.perf_counter() - t0) * 1e3,
            ))

        for mi, method in enumerate(config.methods):
            if method == "kmeans":
                continue
            for gi, grid_value in enumerate(config.grid):
                cell_seed = spawn(config.seed, run, 3, mi, gi)
                t0 = time.perf_counter()
                labels = _run_cell(method, X, grid_value, cfg, config, cell_seed)
                wall_ms = (time.perf_counter() - t0) * 1e3
                ref_labels = kernel_reference.labels if method == "keskeva" else reference.labels
                report.rows.append(ExperimentRow(
                    method, grid_value, run,
                    relative_accuracy(labels, ref_labels, config.n_clusters),
                    None if truth is None else relative_accuracy(labels, truth, config.n_clusters),
                    wall_ms,
                ))
    return report


_CONFIG_KEYS = {
    "methods", "grid", "runs", "seed", "k", "d", "n", "rank", "side",
    "dataset", "format", "points_as", "daug", "nuaug", "r_max", "restarts",
    "max_iter", "tol", "kernel", "var", "rank_fn", "epsilon", "threads",
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the key = value experiment file format (see README for the keys)."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = val.strip()

    def intlist(s):
        return tuple(int(tok) for tok in s.replace(",", " ").split())

    required = [k for k in ("methods", "grid", "runs", "k") if k not in values]
    if required:
        raise ValueError(f"config is missing required keys: {', '.join(required)}")

    synth = None
    if "dataset" not in values:
        for k in ("d", "n"):
            if k not in values:
                raise ValueError(f"synthetic config requires key {k!r}")
        synth = SynthSpec(
            n_features=int(values["d"]),
            n_points=int(values["n"]),
            n_clusters=int(values["k"]),
            rank=int(values["rank"]) if "rank" in values else None,
            hypercube_side=float(values["side"]) if "side" in values else None,
        )
    return ExperimentConfig(
        methods=tuple(values["methods"].replace(",", " ").split()),
        grid=intlist(values["grid"]),
        runs=int(values["runs"]),
        n_clusters=int(values["k"]),
        seed=int(values.get("seed", "0")),
        synth=synth,
        data_path=values.get("dataset"),
        data_format=values.get("format", "csv"),
        points_as=values.get("points_as", "rows"),
        n_extra_dims=int(values.get("daug", "100")),
        n_extra_points=int(values.get("nuaug", "100")),
        n_draws=int(values.get("r_max", "10")),
        restarts=int(values.get("restarts", "5")),
        max_iter=int(values.get("max_iter", "300")),
        tol=float(values.get("tol", "1e-6")),
        kernel=values.get("kernel", "linear"),
        var=float(values.get("var", "1.0")),
        rank_fn=values.get("rank_fn", "fdr_weighted"),
        grad_tol=float(values.get("epsilon", "0.0")),
        threads=int(values.get("threads", "1")),
    )
