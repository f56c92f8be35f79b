"""Hot numeric kernels: numba-jitted loops with a pure-numpy fallback.

The masked sigmoid-BCE loss/gradient accumulation is the inner loop of both
training and fine-tuning and dominates engine runtime. Two implementations
live here:

* a sequential ``@njit`` kernel (default when numba is importable), and
* a vectorized numpy path using ``np.add.at`` scatter-adds.

Selection happens once at import: set ``HYPERSCOPE_NO_NUMBA=1`` to force the
numpy path. Within one backend results are bit-deterministic (fixed summation
order); across backends the last float bits may differ because numpy reduces
pairwise while the jit loop reduces sequentially. ``backend()`` reports which
path is active so callers (provenance) can pin it.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FORCE_NUMPY = os.environ.get("HYPERSCOPE_NO_NUMBA", "").strip() not in ("", "0")

try:  # pragma: no cover - exercised implicitly by backend selection
    if _FORCE_NUMPY:
        raise ImportError("numba disabled by HYPERSCOPE_NO_NUMBA")
    from numba import njit

    _HAS_NUMBA = True
except ImportError:  # pragma: no cover
    _HAS_NUMBA = False


def backend() -> str:
    """Name of the active kernel path, ``"numba"`` or ``"numpy"``."""
    return "numba" if _HAS_NUMBA else "numpy"


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict_matrix(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """sigmoid(X @ Y.T); shared by both backends (BLAS matmul)."""
    return sigmoid(X @ Y.T)


def bce_loss_grad_numpy(X, Y, rows, cols, targets, weights, dX, dY):
    """Accumulate weighted sigmoid-BCE over the given cells.

    Adds raw (unnormalized) gradient contributions into dX/dY and returns
    ``(sum_k w_k * bce_k, sum_k w_k)``. Callers divide by the weight sum.
    """
    if rows.size == 0:
        return 0.0, 0.0
    z = np.einsum("kr,kr->k", X[rows], Y[cols])
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    loss = float(np.sum(weights * (softplus - targets * z)))
    g = weights * (sigmoid(z) - targets)
    np.add.at(dX, rows, g[:, None] * Y[cols])
    np.add.at(dY, cols, g[:, None] * X[rows])
    return loss, float(np.sum(weights))


if _HAS_NUMBA:

    @njit(cache=True)
    def _bce_loss_grad_jit(X, Y, rows, cols, targets, weights, dX, dY):
        r = X.shape[1]
        loss = 0.0
        wsum = 0.0
        for k in range(rows.shape[0]):
            i = rows[k]
            j = cols[k]
            z = 0.0
            for a in range(r):
                z += X[i, a] * Y[j, a]
            if z >= 0.0:
                softplus = z + math.log1p(math.exp(-z))
                p = 1.0 / (1.0 + math.exp(-z))
            else:
                ez = math.exp(z)
                softplus = math.log1p(ez)
                p = ez / (1.0 + ez)
            w = weights[k]
            y = targets[k]
            loss += w * (softplus - y * z)
            g = w * (p - y)
            for a in range(r):
                dX[i, a] += g * Y[j, a]
                dY[j, a] += g * X[i, a]
            wsum += w
        return loss, wsum

    def bce_loss_grad_numba(X, Y, rows, cols, targets, weights, dX, dY):
        if rows.size == 0:
            return 0.0, 0.0
        loss, wsum = _bce_loss_grad_jit(X, Y, rows, cols, targets, weights, dX, dY)
        return float(loss), float(wsum)

    bce_loss_grad = bce_loss_grad_numba
else:
    bce_loss_grad_numba = None
    bce_loss_grad = bce_loss_grad_numpy
