"""Kernel descriptors and Gram evaluation.

Three kernels cover everything the toolkit needs: a Gaussian with isotropic
covariance var * I (normalized so it integrates to one, which makes it usable
as a density kernel), the plain inner product, and a sigmoid. The Gaussian
normalizer underflows for dim beyond a few hundred, so density work should go
through the log-domain helpers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class GaussianKernel:
    """exp(-|x - y|^2 / (2 var)) / (2 pi var)^(dim/2); covariance var * I."""

    var: float
    dim: int

    def __post_init__(self):
        if self.var <= 0:
            raise ValueError("var must be positive")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")

    @property
    def log_normalizer(self) -> float:
        return -0.5 * self.dim * math.log(2.0 * math.pi * self.var)


@dataclass(frozen=True)
class LinearKernel:
    """Plain inner product x'y."""


@dataclass(frozen=True)
class SigmoidKernel:
    """tanh(alpha x'y + bias)."""

    alpha: float
    bias: float


KernelSpec = Union[GaussianKernel, LinearKernel, SigmoidKernel]


def _as_points(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    return P


def _check_dims(spec: KernelSpec, *arrays: np.ndarray):
    dims = {a.shape[0] for a in arrays}
    if len(dims) > 1:
        raise ValueError(f"point dimensions differ: {sorted(dims)}")
    if isinstance(spec, GaussianKernel) and dims and dims.pop() != spec.dim:
        raise ValueError("point dimension does not match the kernel's dim")


def kernel_eval(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Kernel value for a single pair of vectors."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same dimension")
    _check_dims(spec, x[:, None], y[:, None])
    if isinstance(spec, GaussianKernel):
        sq = float(((x - y) ** 2).sum())
        return math.exp(-sq / (2.0 * spec.var) + spec.log_normalizer)
    if isinstance(spec, LinearKernel):
        return float(x @ y)
    if isinstance(spec, SigmoidKernel):
        return math.tanh(spec.alpha * float(x @ y) + spec.bias)
    raise TypeError(f"unknown kernel spec {spec!r}")


def gram(spec: KernelSpec, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Full kernel matrix between point columns of P and Q."""
    P, Q = _as_points(P), _as_points(Q)
    _check_dims(spec, P, Q)
    if isinstance(spec, GaussianKernel):
        return np.exp(log_gram(spec, P, Q))
    inner = P.T @ Q
    if isinstance(spec, LinearKernel):
        return inner
    if isinstance(spec, SigmoidKernel):
        return np.tanh(spec.alpha * inner + spec.bias)
    raise TypeError(f"unknown kernel spec {spec!r}")


def log_gram(spec: GaussianKernel, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """log of the Gaussian Gram matrix; safe for dimensions where exp underflows."""
    if not isinstance(spec, GaussianKernel):
        raise ValueError("log_gram is defined for the Gaussian kernel only")
    P, Q = _as_points(P), _as_points(Q)
    _check_dims(spec, P, Q)
    sq = cdist(np.ascontiguousarray(P.T), np.ascontiguousarray(Q.T), "sqeuclidean")
    return -sq / (2.0 * spec.var) + spec.log_normalizer


def double_bandwidth(spec: GaussianKernel) -> GaussianKernel:
    """Gaussian with covariance doubled: the kernel of the convolution identity.

    Integrating the product of two Gaussian kernels over their common
    argument yields the same Gaussian family evaluated at the two centers
    with covariance 2 var.
    """
    if not isinstance(spec, GaussianKernel):
        raise ValueError("double_bandwidth is defined for the Gaussian kernel only")
    return GaussianKernel(var=2.0 * spec.var, dim=spec.dim)


def parse_kernel(text: str, dim: int) -> KernelSpec:
    """Parse a CLI kernel descriptor: gaussian[:var], linear, sigmoid[:alpha,bias]."""
    name, _, args = text.partition(":")
    name = name.strip().lower()
    if name == "linear":
        return LinearKernel()
    if name == "gaussian":
        var = float(args) if args else 1.0
        return GaussianKernel(var=var, dim=dim)
    if name == "sigmoid":
        if args:
            try:
                alpha_s, bias_s = args.split(",")
            except ValueError:
                raise ValueError("sigmoid kernel takes two parameters: alpha,bias") from None
            return SigmoidKernel(alpha=float(alpha_s), bias=float(bias_s))
        return SigmoidKernel(alpha=0.0045, bias=0.11)
    raise ValueError(f"unknown kernel {name!r}")
