"""Kernel mean embeddings and their RKHS algebra.

Elements of the base RKHS are carried in two forms: finite weighted point
expansions (empirical embeddings of bags) and closed-form embeddings of
isotropic Gaussian inputs. Everything downstream consumes only inner
products, so the two forms mix freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .base_kernels import FAMILY_CODES, GAUSSIAN, BaseKernel
from .errors import InputError, NumericalConsistencyError, UnsupportedError

__all__ = [
    "SampleSet",
    "EmpiricalEmbedding",
    "GaussianKmeEmbedding",
    "embed",
    "exact_gaussian_embedding",
    "inner",
    "squared_distance",
    "rkhs_distance",
    "concentration_bound",
    "gaussian_family_kme_inner",
    "gaussian_kme_inner_matrix",
    "gaussian_kme_cross_inner",
]

# squared distances this far below zero are floating-point noise; beyond is corruption
NEG_TOL = 1e-10


@dataclass(frozen=True)
class SampleSet:
    """A bag of M i.i.d. draws from one input distribution, rows of shape (M, d)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InputError(f"sample set must be a nonempty (M, d) matrix, got shape {pts.shape}")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class EmpiricalEmbedding:
    """Weighted expansion sum_m w_m k(., s_m) in the base RKHS."""

    kernel: BaseKernel
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.kernel.dim:
            raise InputError(
                f"embedding points must be (m, {self.kernel.dim}), got shape {pts.shape}"
            )
        if w.shape != (pts.shape[0],):
            raise InputError("weights must match the number of points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class GaussianKmeEmbedding:
    """Exact KME of N(mean, spread^2 I) under a gaussian base kernel."""

    kernel: BaseKernel
    mean: np.ndarray
    spread: float

    def __post_init__(self):
        if self.kernel.family != GAUSSIAN:
            raise UnsupportedError("exact KMEs are available only for the gaussian base kernel")
        m = np.ascontiguousarray(self.mean, dtype=np.float64)
        if m.shape != (self.kernel.dim,):
            raise InputError(f"mean must have shape ({self.kernel.dim},), got {m.shape}")
        if self.spread < 0:
            raise InputError(f"spread must be >= 0, got {self.spread}")
        object.__setattr__(self, "mean", m)


Embedding = EmpiricalEmbedding | GaussianKmeEmbedding


def embed(k: BaseKernel, s: SampleSet) -> EmpiricalEmbedding:
    """Uniform-weight empirical embedding of a bag."""
    if s.dim != k.dim:
        raise InputError(f"bag dimension {s.dim} does not match kernel dimension {k.dim}")
    m = s.size
    return EmpiricalEmbedding(k, s.points, np.full(m, 1.0 / m))


def exact_gaussian_embedding(k: BaseKernel, mean, spread: float) -> GaussianKmeEmbedding:
    return GaussianKmeEmbedding(k, np.asarray(mean, dtype=np.float64), float(spread))


def gaussian_family_kme_inner(m, sigma: float, mp, sigma_p: float, k: BaseKernel) -> float:
    """<mu_Q, mu_Q'> for Q = N(m, sigma^2 I), Q' = N(m', sigma_p^2 I).

    Closed form (g = width^2, v = g + 2 sigma^2 + 2 sigma_p^2):
    (g / v)^(d/2) * exp(-||m - m'||^2 / v). Reduces to the base kernel at
    sigma = sigma_p = 0.
    """
    if k.family != GAUSSIAN:
        raise UnsupportedError("closed-form KME inner products require the gaussian base kernel")
    m = np.asarray(m, dtype=np.float64)
    mp = np.asarray(mp, dtype=np.float64)
    if m.shape != (k.dim,) or mp.shape != (k.dim,):
        raise InputError(f"means must have shape ({k.dim},)")
    if sigma < 0 or sigma_p < 0:
        raise InputError("spreads must be >= 0")
    g = k.width * k.width
    # symmetric grouping keeps the swap (m, s) <-> (m', s') bit-exact
    v = g + 2.0 * (sigma * sigma + sigma_p * sigma_p)
    diff = m - mp
    return float((g / v) ** (k.dim / 2.0) * np.exp(-np.dot(diff, diff) / v))


def _require_same_kernel(e1: Embedding, e2: Embedding) -> BaseKernel:
    if e1.kernel != e2.kernel:
        raise InputError(f"embeddings use different base kernels: {e1.kernel} vs {e2.kernel}")
    return e1.kernel


def _mixed_inner(ge: GaussianKmeEmbedding, ee: EmpiricalEmbedding) -> float:
    # each expansion atom is the sigma' = 0 case of the closed form
    k = ge.kernel
    g = k.width * k.width
    v = g + 2.0 * ge.spread * ge.spread
    diff = ee.points - ge.mean
    sq = np.einsum("ij,ij->i", diff, diff)
    vals = (g / v) ** (k.dim / 2.0) * np.exp(-sq / v)
    return float(ee.weights @ vals)


def inner(e1: Embedding, e2: Embedding) -> float:
    """RKHS inner product via the reproducing property; symmetric in arguments."""
    k = _require_same_kernel(e1, e2)
    emp1 = isinstance(e1, EmpiricalEmbedding)
    emp2 = isinstance(e2, EmpiricalEmbedding)
    if emp1 and emp2:
        return _backend.pair_sum(
            e1.points, e1.weights, e2.points, e2.weights, FAMILY_CODES[k.family], k.width
        )
    if not emp1 and not emp2:
        return gaussian_family_kme_inner(e1.mean, e1.spread, e2.mean, e2.spread, k)
    if emp1:
        return _mixed_inner(e2, e1)
    return _mixed_inner(e1, e2)


def _clamp_sq(sq: float) -> float:
    if sq >= 0.0:
        return sq
    if sq >= -NEG_TOL:
        return 0.0
    raise NumericalConsistencyError(
        f"squared RKHS distance {sq} is below -{NEG_TOL}; Gram data is inconsistent"
    )


def squared_distance(e1: Embedding, e2: Embedding) -> float:
    """||e1 - e2||^2 with tiny negative values clamped to 0."""
    if e1 is e2:
        return 0.0
    sq = inner(e1, e1) - 2.0 * inner(e1, e2) + inner(e2, e2)
    return _clamp_sq(sq)


def rkhs_distance(e1: Embedding, e2: Embedding) -> float:
    return math.sqrt(squared_distance(e1, e2))


def concentration_bound(m: int, delta: float, kernel_sup: float) -> float:
    """High-probability estimation radius for the empirical embedding of one bag.

    2 sqrt(s^2 / M) + sqrt(2 s ln(1/delta) / M) for sup-norm s; valid with
    probability at least 1 - delta.
    """
    if not (0.0 < delta < 1.0):
        raise InputError(f"delta must lie in (0, 1), got {delta}")
    if m < 1:
        raise InputError(f"bag size must be >= 1, got {m}")
    if not (kernel_sup > 0):
        raise InputError(f"kernel sup-norm must be > 0, got {kernel_sup}")
    return 2.0 * math.sqrt(kernel_sup * kernel_sup / m) + math.sqrt(
        2.0 * kernel_sup * math.log(1.0 / delta) / m
    )


def gaussian_kme_inner_matrix(k: BaseKernel, means: np.ndarray, spreads: np.ndarray) -> np.ndarray:
    """All pairwise exact-KME inner products for isotropic Gaussian inputs."""
    if k.family != GAUSSIAN:
        raise UnsupportedError("closed-form KME inner products require the gaussian base kernel")
    means = np.asarray(means, dtype=np.float64)
    spreads = np.asarray(spreads, dtype=np.float64)
    g = k.width * k.width
    s2 = spreads * spreads
    v = g + 2.0 * (s2[:, None] + s2[None, :])
    sq = np.sum(means * means, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * means @ means.T
    np.maximum(d2, 0.0, out=d2)
    return (g / v) ** (k.dim / 2.0) * np.exp(-d2 / v)


def gaussian_kme_cross_inner(
    k: BaseKernel, means_a: np.ndarray, spreads_a: np.ndarray, means_b: np.ndarray, spreads_b: np.ndarray
) -> np.ndarray:
    """Cross inner-product matrix between two families of exact Gaussian KMEs."""
    if k.family != GAUSSIAN:
        raise UnsupportedError("closed-form KME inner products require the gaussian base kernel")
    means_a = np.asarray(means_a, dtype=np.float64)
    means_b = np.asarray(means_b, dtype=np.float64)
    sa2 = np.asarray(spreads_a, dtype=np.float64) ** 2
    sb2 = np.asarray(spreads_b, dtype=np.float64) ** 2
    g = k.width * k.width
    v = g + 2.0 * (sa2[:, None] + sb2[None, :])
    qa = np.sum(means_a * means_a, axis=1)
    qb = np.sum(means_b * means_b, axis=1)
    d2 = qa[:, None] + qb[None, :] - 2.0 * means_a @ means_b.T
    np.maximum(d2, 0.0, out=d2)
    return (g / v) ** (k.dim / 2.0) * np.exp(-d2 / v)
