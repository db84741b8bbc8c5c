"""Sketch-and-validate clustering toolkit.

Cluster big data by repeatedly clustering small random sketches of it: either
a few feature rows or a few point columns. Each sketch is validated by how
stable its clustering stays under augmentation (or, in the divergence-based
variants, by how well its density estimate represents the population), and
the best draw labels the full data set.
"""

from .bench import (
    ExperimentConfig,
    ExperimentReport,
    SynthSpec,
    gen_synthetic,
    parse_config,
    relative_accuracy,
    rp_kmeans_baseline,
    run_experiment,
)
from .data import (
    ParseError,
    center_columns,
    load_dense,
    load_libsvm,
    restrict_cols,
    restrict_rows,
    sample_indices,
    standardize_features,
)
from .dimsketch import (
    DimDraw,
    SketchOutcome,
    extend_centroids,
    fdr,
    rank_score,
    skeva_batch,
    skeva_sequential,
    validation_set_dims,
)
from .divergence import (
    DivergenceOutcome,
    ParzenMixture,
    cs_divergence,
    cs_divergence_to_origin,
    diskeva_dims,
    diskeva_points,
    num_draws,
    origin_mixture,
    zero_pad_mixture,
)
from .kernels import (
    GaussianKernel,
    KernelSpec,
    LinearKernel,
    SigmoidKernel,
    double_bandwidth,
    gram,
    kernel_eval,
    log_gram,
    parse_kernel,
)
from .kernelsketch import (
    KernelClustering,
    KeskevaOutcome,
    assign_by_kernel,
    augment_centroids,
    centroid_coefficients,
    coeff_distance,
    kernel_kmeans,
    kernel_kmeans_restarts,
    kernel_point_to_cluster_dist,
    keskeva,
    regroup_sketch,
)
from .kmeans import (
    Clustering,
    KMeansConfig,
    assign_to_nearest,
    best_of_restarts,
    lloyd_kmeans,
    update_centroids,
)

__version__ = "0.1.0"

__all__ = [
    "Clustering",
    "DimDraw",
    "DivergenceOutcome",
    "ExperimentConfig",
    "ExperimentReport",
    "GaussianKernel",
    "KMeansConfig",
    "KernelClustering",
    "KernelSpec",
    "KeskevaOutcome",
    "LinearKernel",
    "ParseError",
    "ParzenMixture",
    "SigmoidKernel",
    "SketchOutcome",
    "SynthSpec",
    "assign_by_kernel",
    "assign_to_nearest",
    "augment_centroids",
    "best_of_restarts",
    "center_columns",
    "centroid_coefficients",
    "coeff_distance",
    "cs_divergence",
    "cs_divergence_to_origin",
    "diskeva_dims",
    "diskeva_points",
    "double_bandwidth",
    "extend_centroids",
    "fdr",
    "gen_synthetic",
    "gram",
    "kernel_eval",
    "kernel_kmeans",
    "kernel_kmeans_restarts",
    "kernel_point_to_cluster_dist",
    "keskeva",
    "lloyd_kmeans",
    "load_dense",
    "load_libsvm",
    "log_gram",
    "num_draws",
    "origin_mixture",
    "parse_config",
    "parse_kernel",
    "rank_score",
    "relative_accuracy",
    "restrict_cols",
    "restrict_rows",
    "rp_kmeans_baseline",
    "run_experiment",
    "sample_indices",
    "skeva_batch",
    "skeva_sequential",
    "standardize_features",
    "update_centroids",
    "validation_set_dims",
    "zero_pad_mixture",
]
