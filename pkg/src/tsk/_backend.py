"""Backend selection for the two hot inner loops.

`tsk._ckern` (Cython) is used when it compiled at install time; otherwise a
numpy implementation with identical semantics takes over. Set
``TSK_BACKEND=python`` to force the fallback (used by the parity tests and
the backend benchmark).

Within either backend the pair sum is independent of memory blocking: rows
are always reduced over a fixed 65536-wide logical column-chunk grid and the
per-row results are combined in a single fixed-length reduction.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.spatial.distance import cdist

try:
    from . import _ckern
except ImportError:  # extension not built
    _ckern = None

HAVE_EXT = _ckern is not None


def active_backend() -> str:
    if HAVE_EXT and os.environ.get("TSK_BACKEND", "") != "python":
        return "cython"
    return "python"


_COL_CHUNK = 65536
_BLOCK_BUDGET = 2**22  # floats per distance block in the numpy path


def _dist_block(X: np.ndarray, Y: np.ndarray, family: int) -> np.ndarray:
    if X.shape[1] <= 64:
        metric = "sqeuclidean" if family == 0 else "cityblock"
        return cdist(X, Y, metric)
    # wide rows: broadcast + pairwise summation over the axis
    diff = X[:, None, :] - Y[None, :, :]
    if family == 0:
        return np.sum(diff * diff, axis=2)
    return np.sum(np.abs(diff), axis=2)


def _pair_sum_numpy(X, wx, Y, wy, family, width, row_block=None):
    m, n = X.shape[0], Y.shape[0]
    if row_block is None:
        row_block = max(1, _BLOCK_BUDGET // max(n, 1))
    scale = width * width if family == 0 else width
    rowsums = np.zeros(m)
    for r0 in range(0, m, row_block):
        r1 = min(r0 + row_block, m)
        for c0 in range(0, n, _COL_CHUNK):
            c1 = min(c0 + _COL_CHUNK, n)
            block = np.exp(-_dist_block(X[r0:r1], Y[c0:c1], family) / scale)
            # per-row dots: the reduction tree never depends on row_block
            for i in range(r1 - r0):
                rowsums[r0 + i] += np.dot(block[i], wy[c0:c1])
    return float(wx @ rowsums)


def pair_sum(X, wx, Y, wy, family: int, width: float, row_block=None) -> float:
    """sum_ij wx_i wy_j k(x_i, y_j) for family 0 = gaussian, 1 = laplacian."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    wx = np.ascontiguousarray(wx, dtype=np.float64)
    wy = np.ascontiguousarray(wy, dtype=np.float64)
    if active_backend() == "cython":
        return _ckern.pair_sum(X, wx, Y, wy, family, width)
    return _pair_sum_numpy(X, wx, Y, wy, family, width, row_block=row_block)


def _cd_sweep_numpy(K, y, alpha, f, box_c, diag_floor):
    biggest = 0.0
    for i in range(K.shape[0]):
        kii = K[i, i]
        if kii <= diag_floor:
            continue
        g = 1.0 - y[i] * f[i]
        anew = min(max(alpha[i] + g / kii, 0.0), box_c)
        delta = anew - alpha[i]
        if delta != 0.0:
            alpha[i] = anew
            f += (delta * y[i]) * K[i]
        if abs(delta) > biggest:
            biggest = abs(delta)
    return biggest


def cd_sweep(K, y, alpha, f, box_c: float, diag_floor: float) -> float:
    """One cyclic dual coordinate pass; mutates alpha and f, returns max |change|."""
    if active_backend() == "cython":
        return _ckern.cd_sweep(K, y, alpha, f, box_c, diag_floor)
    return _cd_sweep_numpy(K, y, alpha, f, box_c, diag_floor)
