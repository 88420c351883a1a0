"""Hinge-loss regularized empirical risk minimization over the second-level RKHS.

The primal problem min_f (1/N) sum hinge(y_n, f(x_n)) + lambda ||f||^2 has no
offset term, so its dual is a plain box-constrained quadratic maximization
    max_alpha sum_i alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij,
    0 <= alpha_i <= C = 1/(2 lambda N),
solved here by cyclic coordinate ascent. The reported objective is rescaled
to primal units (2 lambda * dual), which at the optimum equals the minimal
regularized empirical risk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import _backend
from .errors import InputError, NumericalConsistencyError, UnsupportedError
from .hilbert_kernel import H_GAUSSIAN, H_LINEAR, HilbertKernel, hk_eval
from .kme import (
    Embedding,
    EmpiricalEmbedding,
    GaussianKmeEmbedding,
    SampleSet,
    embed,
    gaussian_kme_cross_inner,
    gaussian_kme_inner_matrix,
    inner,
    NEG_TOL,
)

__all__ = [
    "GramMatrix",
    "SvmModel",
    "hinge",
    "zero_one",
    "clip",
    "sgn",
    "train",
    "decision_value",
    "decision_values",
    "predict",
    "regularized_empirical_risk",
    "kkt_residual",
    "build_gram",
    "gram_from_points",
    "model_to_json",
    "model_from_json",
]

DIAG_FLOOR = 1e-12  # linear-kernel coordinates below this norm are inert


def sgn(t: float) -> float:
    """Sign with ties sent to +1."""
    return 1.0 if t >= 0.0 else -1.0


def _check_label(y) -> float:
    if y not in (-1, 1, -1.0, 1.0):
        raise InputError(f"labels must be -1 or +1, got {y!r}")
    return float(y)


def hinge(y, t: float) -> float:
    """max(0, 1 - y t)."""
    y = _check_label(y)
    return max(0.0, 1.0 - y * t)


def zero_one(y, t: float) -> float:
    """0 iff sgn(t) == y, with sgn(0) = +1."""
    y = _check_label(y)
    return 0.0 if sgn(t) == y else 1.0


def clip(t: float, m: float) -> float:
    """Truncate t to [-m, m]."""
    if not (m > 0):
        raise InputError(f"clip bound must be > 0, got {m}")
    return min(m, max(-m, t))


@dataclass(frozen=True)
class GramMatrix:
    """Cached second-level kernel matrix over the training bags."""

    entries: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.entries, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise InputError(f"Gram matrix must be square, got shape {k.shape}")
        if not np.array_equal(k, k.T):
            raise InputError("Gram matrix must be symmetric")
        object.__setattr__(self, "entries", k)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])


@dataclass(frozen=True)
class SvmModel:
    dual_coefs: np.ndarray
    labels: np.ndarray
    lam: float
    box_c: float
    clip_bound: float
    converged: bool
    kkt: float
    sweeps: int
    objective: float  # 2 lambda * dual value == optimal regularized risk at convergence
    norm_sq: float  # ||f||_k^2 at the returned coefficients
    objective_path: tuple = field(repr=False, default=())
    support: object = None  # tuple of embeddings, or (N, d) point array
    hkernel: HilbertKernel | None = None


def _margins(gram: GramMatrix, labels: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return gram.entries @ (alpha * labels)


def _projected_gradient_residual(
    g: np.ndarray, alpha: np.ndarray, box_c: float, active: np.ndarray
) -> float:
    viol = np.abs(g)
    viol = np.where(alpha <= 0.0, np.maximum(g, 0.0), viol)
    viol = np.where(alpha >= box_c, np.maximum(-g, 0.0), viol)
    viol = np.where(active, viol, 0.0)
    return float(viol.max(initial=0.0))


def kkt_residual(model: SvmModel, gram: GramMatrix, labels) -> float:
    """Max projected-gradient magnitude of the dual objective onto [0, C].

    Coordinates with K_ii <= 1e-12 are inert under the linear kernel (zero-norm
    atoms) and are excluded, matching the solver.
    """
    labels = _as_labels(labels, gram.size)
    alpha = np.asarray(model.dual_coefs, dtype=np.float64)
    g = 1.0 - labels * _margins(gram, labels, alpha)
    active = np.diag(gram.entries) > DIAG_FLOOR
    return _projected_gradient_residual(g, alpha, model.box_c, active)


def _as_labels(labels, n: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (n,):
        raise InputError(f"labels must have shape ({n},), got {y.shape}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("labels must be -1 or +1")
    return y


def train(
    gram: GramMatrix,
    labels,
    lam: float,
    tol: float = 1e-8,
    max_sweeps: int = 10_000,
    support=None,
    hkernel: HilbertKernel | None = None,
    clip_bound: float = 1.0,
) -> SvmModel:
    """Solve the dual by cyclic coordinate ascent.

    Returns a model whose KKT residual is <= tol, or one flagged
    converged=False carrying the residual reached after max_sweeps.
    """
    n = gram.size
    y = _as_labels(labels, n)
    if not (lam > 0):
        raise InputError(f"lambda must be > 0, got {lam}")
    k = gram.entries
    if not np.all(np.isfinite(k)):
        raise InputError("Gram matrix contains non-finite entries")

    box_c = 1.0 / (2.0 * lam * n)
    alpha = np.zeros(n)
    f = np.zeros(n)
    active = np.diag(k) > DIAG_FLOOR
    scale = 2.0 * lam

    objective_path = []
    residual = math.inf
    sweeps = 0
    converged = False
    for sweeps in range(1, max_sweeps + 1):
        _backend.cd_sweep(k, y, alpha, f, box_c, DIAG_FLOOR)
        objective_path.append(scale * (alpha.sum() - 0.5 * np.dot(alpha * y, f)))
        g = 1.0 - y * f
        residual = _projected_gradient_residual(g, alpha, box_c, active)
        if residual <= tol:
            converged = True
            break

    norm_sq = float(np.dot(alpha * y, f))
    if norm_sq > 1.0 / lam + 1e-9:
        raise NumericalConsistencyError(
            f"||f||^2 = {norm_sq} exceeds the a-priori bound 1/lambda = {1.0 / lam}"
        )

    return SvmModel(
        dual_coefs=alpha,
        labels=y,
        lam=float(lam),
        box_c=box_c,
        clip_bound=float(clip_bound),
        converged=converged,
        kkt=residual,
        sweeps=sweeps,
        objective=objective_path[-1] if objective_path else 0.0,
        norm_sq=norm_sq,
        objective_path=tuple(objective_path),
        support=tuple(support) if isinstance(support, (list, tuple)) else support,
        hkernel=hkernel,
    )


def _require_support(model: SvmModel):
    if model.support is None or model.hkernel is None:
        raise InputError("model carries no support embeddings; prediction is unavailable")


def decision_value(model: SvmModel, e: Embedding) -> float:
    """f(e) = sum_i alpha_i y_i k(support_i, e)."""
    _require_support(model)
    coef = model.dual_coefs * model.labels
    return float(sum(c * hk_eval(model.hkernel, s, e) for c, s in zip(coef, model.support) if c != 0.0))


def _all_exact(embs) -> bool:
    return all(isinstance(e, GaussianKmeEmbedding) for e in embs)


def decision_values(model: SvmModel, embeddings) -> np.ndarray:
    """Vectorized f over many inputs; closed-form fast path when everything is exact."""
    _require_support(model)
    coef = model.dual_coefs * model.labels
    sup = model.support
    if (
        isinstance(sup, tuple)
        and _all_exact(sup)
        and _all_exact(embeddings)
        and model.hkernel.family == H_GAUSSIAN
    ):
        k = sup[0].kernel
        sm = np.array([e.mean for e in sup])
        ss = np.array([e.spread for e in sup])
        tm = np.array([e.mean for e in embeddings])
        ts = np.array([e.spread for e in embeddings])
        cross = gaussian_kme_cross_inner(k, sm, ss, tm, ts)
        sup_sq = np.array([inner(e, e) for e in sup])
        tgt_sq = np.array([inner(e, e) for e in embeddings])
        d2 = sup_sq[:, None] + tgt_sq[None, :] - 2.0 * cross
        np.maximum(d2, 0.0, out=d2)
        km = np.exp(-d2 / (model.hkernel.width**2))
        return coef @ km
    return np.array([decision_value(model, e) for e in embeddings])


def predict(model: SvmModel, s: SampleSet) -> int:
    """sgn(clip(f(embed(s)))) with sgn(0) = +1; clipping never flips the sign."""
    _require_support(model)
    base = model.support[0].kernel
    val = decision_value(model, embed(base, s))
    return int(sgn(clip(val, model.clip_bound)))


def regularized_empirical_risk(
    model: SvmModel, gram: GramMatrix, labels, lam: float, loss: str = "hinge", clipped: bool = False
) -> float:
    """(1/N) sum loss(y_n, [clip] f(x_n)) + lambda ||f||^2 on the training Gram."""
    y = _as_labels(labels, gram.size)
    alpha = np.asarray(model.dual_coefs, dtype=np.float64)
    f = _margins(gram, y, alpha)
    norm_sq = float(np.dot(alpha * y, f))
    vals = np.clip(f, -model.clip_bound, model.clip_bound) if clipped else f
    if loss == "hinge":
        emp = float(np.mean(np.maximum(0.0, 1.0 - y * vals)))
    elif loss == "zero_one":
        emp = float(np.mean(np.where(vals >= 0.0, 1.0, -1.0) != y))
    else:
        raise InputError(f"unknown loss {loss!r}")
    return emp + lam * norm_sq


def build_gram(hk: HilbertKernel, embeddings) -> GramMatrix:
    """Second-level Gram over a list of embeddings.

    All-exact Gaussian-family inputs take a closed-form vectorized path;
    anything else goes through pairwise inner products.
    """
    embs = list(embeddings)
    n = len(embs)
    if n == 0:
        raise InputError("cannot build a Gram matrix from zero embeddings")
    if _all_exact(embs):
        k = embs[0].kernel
        means = np.array([e.mean for e in embs])
        spreads = np.array([e.spread for e in embs])
        m = gaussian_kme_inner_matrix(k, means, spreads)
        if hk.family == H_LINEAR:
            entries = m
        else:
            diag = np.diag(m)
            d2 = diag[:, None] + diag[None, :] - 2.0 * m
            _clamp_d2(d2)
            entries = np.exp(-d2 / (hk.width**2))
    else:
        inners = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                inners[i, j] = inners[j, i] = inner(embs[i], embs[j])
        if hk.family == H_LINEAR:
            entries = inners
        else:
            diag = np.diag(inners).copy()
            d2 = diag[:, None] + diag[None, :] - 2.0 * inners
            _clamp_d2(d2)
            entries = np.exp(-d2 / (hk.width**2))
    entries = np.tril(entries) + np.tril(entries, -1).T  # exact symmetry
    return GramMatrix(entries)


def _clamp_d2(d2: np.ndarray):
    low = d2.min(initial=0.0)
    if low < -NEG_TOL:
        raise NumericalConsistencyError(
            f"pairwise squared distance {low} is below -{NEG_TOL}; embedding data is inconsistent"
        )
    np.maximum(d2, 0.0, out=d2)


def gram_from_points(hk: HilbertKernel, x: np.ndarray) -> GramMatrix:
    """Gram over raw Hilbert-space points (identity embedding geometry)."""
    x = np.asarray(x, dtype=np.float64)
    if hk.family == H_GAUSSIAN:
        d2 = cdist(x, x, "sqeuclidean")
        entries = np.exp(-d2 / (hk.width**2))
    else:
        entries = x @ x.T
    entries = np.tril(entries) + np.tril(entries, -1).T
    return GramMatrix(entries)


def model_to_json(model: SvmModel) -> dict:
    """Persistable form: coefficients, kernels, and raw support data.

    Empirical support embeddings are stored as their raw sample bags so
    prediction re-embeds from samples; exact Gaussian embeddings store their
    (mean, spread) parameters.
    """
    _require_support(model)
    support = []
    if isinstance(model.support, np.ndarray):
        raise UnsupportedError("point-geometry models have no bag representation to persist")
    for e in model.support:
        if isinstance(e, EmpiricalEmbedding):
            support.append({"samples": e.points.tolist(), "weights": e.weights.tolist()})
        else:
            support.append({"mean": e.mean.tolist(), "spread": e.spread})
    base = model.support[0].kernel
    return {
        "lambda": model.lam,
        "clip_bound": model.clip_bound,
        "dual_coefs": model.dual_coefs.tolist(),
        "labels": model.labels.astype(int).tolist(),
        "base_kernel": base.to_config(),
        "hilbert_kernel": model.hkernel.to_config(),
        "converged": model.converged,
        "kkt_residual": model.kkt,
        "norm_sq": model.norm_sq,
    } | {"support": support}


def model_from_json(data: dict) -> SvmModel:
    from .base_kernels import BaseKernel

    try:
        base = BaseKernel.from_config(data["base_kernel"])
        hk = HilbertKernel.from_config(data["hilbert_kernel"])
        support = []
        for rec in data["support"]:
            if "samples" in rec:
                pts = np.asarray(rec["samples"], dtype=np.float64)
                w = np.asarray(rec.get("weights", np.full(len(pts), 1.0 / len(pts))), dtype=np.float64)
                support.append(EmpiricalEmbedding(base, pts, w))
            else:
                support.append(GaussianKmeEmbedding(base, np.asarray(rec["mean"]), float(rec["spread"])))
        alpha = np.asarray(data["dual_coefs"], dtype=np.float64)
        labels = np.asarray(data["labels"], dtype=np.float64)
        lam = float(data["lambda"])
        return SvmModel(
            dual_coefs=alpha,
            labels=labels,
            lam=lam,
            box_c=1.0 / (2.0 * lam * len(alpha)),
            clip_bound=float(data["clip_bound"]),
            converged=bool(data.get("converged", True)),
            kkt=float(data.get("kkt_residual", 0.0)),
            sweeps=0,
            objective=0.0,
            norm_sq=float(data.get("norm_sq", 0.0)),
            support=tuple(support),
            hkernel=hk,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed model JSON: {exc}") from exc


def decision_values_points(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """f over raw points for models trained on point Grams."""
    _require_support(model)
    sup = model.support
    if not isinstance(sup, np.ndarray):
        raise UnsupportedError("model was not trained on raw points")
    x = np.asarray(x, dtype=np.float64)
    coef = model.dual_coefs * model.labels
    if model.hkernel.family == H_GAUSSIAN:
        km = np.exp(-cdist(sup, x, "sqeuclidean") / (model.hkernel.width**2))
    else:
        km = sup @ x.T
    return coef @ km
