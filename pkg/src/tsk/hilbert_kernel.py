"""Second-level kernels acting on embedding-space elements.

The gaussian family is the Hilbert-space Gaussian kernel evaluated on RKHS
distances; linear is the plain inner product, kept as a baseline. The
gaussian kernel's feature map is Lipschitz with an explicit power-law
modulus, which the bound evaluators consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, UnsupportedError
from .kme import Embedding, inner, squared_distance

__all__ = ["HilbertKernel", "HolderModulus", "hk_eval", "feature_distance", "lipschitz_modulus"]

H_GAUSSIAN = "gaussian"
H_LINEAR = "linear"


@dataclass(frozen=True)
class HilbertKernel:
    family: str
    width: float | None = None  # length scale in embedding-space norm units

    def __post_init__(self):
        if self.family not in (H_GAUSSIAN, H_LINEAR):
            raise InputError(f"unknown second-level kernel family {self.family!r}")
        if self.family == H_GAUSSIAN:
            if self.width is None or not (self.width > 0):
                raise InputError(f"gaussian second-level kernel needs width > 0, got {self.width}")

    def to_config(self) -> dict:
        cfg = {"family": self.family}
        if self.width is not None:
            cfg["width"] = float(self.width)
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "HilbertKernel":
        try:
            fam = cfg["family"]
        except KeyError as exc:
            raise InputError(f"second-level kernel config missing field {exc}") from exc
        width = cfg.get("width")
        return cls(family=fam, width=None if width is None else float(width))

    def with_width(self, width: float) -> "HilbertKernel":
        return HilbertKernel(self.family, width)


@dataclass(frozen=True)
class HolderModulus:
    """Power-law modulus s -> coefficient * s^exponent with exponent in (0, 2]."""

    coefficient: float
    exponent: float

    def __post_init__(self):
        if not (self.coefficient > 0):
            raise InputError(f"modulus coefficient must be > 0, got {self.coefficient}")
        if not (0.0 < self.exponent <= 2.0):
            raise InputError(f"modulus exponent must lie in (0, 2], got {self.exponent}")

    def __call__(self, s: float) -> float:
        if s < 0:
            raise InputError(f"modulus argument must be >= 0, got {s}")
        return self.coefficient * s**self.exponent


def hk_eval(hk: HilbertKernel, e1: Embedding, e2: Embedding) -> float:
    """k(e1, e2): exp(-||e1-e2||^2 / width^2) for gaussian, <e1, e2> for linear."""
    if hk.family == H_LINEAR:
        return inner(e1, e2)
    return math.exp(-squared_distance(e1, e2) / (hk.width * hk.width))


def feature_distance(hk: HilbertKernel, e1: Embedding, e2: Embedding) -> float:
    """||phi(e1) - phi(e2)|| in the second-level RKHS; gaussian only, <= sqrt(2)."""
    if hk.family != H_GAUSSIAN:
        raise UnsupportedError("feature distance is defined for the gaussian family only")
    return math.sqrt(max(2.0 - 2.0 * hk_eval(hk, e1, e2), 0.0))


def lipschitz_modulus(hk: HilbertKernel) -> HolderModulus:
    """Linear majorant of the gaussian feature-map modulus.

    sqrt(2 - 2 exp(-s^2/w^2)) <= (sqrt(2)/w) * s, from 1 - e^-u <= u.
    """
    if hk.family != H_GAUSSIAN:
        raise UnsupportedError("the power-law modulus is defined for the gaussian family only")
    return HolderModulus(coefficient=math.sqrt(2.0) / hk.width, exponent=1.0)


def gaussian_gram_from_sqdist(hk: HilbertKernel, d2: np.ndarray) -> np.ndarray:
    """Gram matrix from a precomputed squared-distance matrix (gaussian family)."""
    if hk.family != H_GAUSSIAN:
        raise UnsupportedError("squared-distance Grams apply to the gaussian family only")
    return np.exp(-d2 / (hk.width * hk.width))
