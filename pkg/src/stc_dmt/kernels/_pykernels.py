"""Pure-Python/numpy versions of the hot kernels.

Same signatures and results as the Cython module ``_ckernels``.
"""
import math

import numpy as np

# Widening applied to the integer interval at each level; candidates that
# fall outside the radius are rejected by the exact partial-sum test.
_EDGE = 1e-7


def fp_enumerate(rmat, radius_sq, cap, collect):
    """Fincke-Pohst enumeration of integer vectors c with ||R c||^2 <= radius_sq.

    Parameters
    ----------
    rmat : (k, k) float array
        Upper-triangular Cholesky factor of the Gram matrix.
    radius_sq : float
        Squared radius, boundary slack already included.
    cap : int
        Stop as soon as more than ``cap`` points are found.
    collect : bool
        Return the coordinates (unsorted) as well as the count.

    Returns
    -------
    count : int
        Number of points, or ``cap + 1`` if the budget was exceeded.
    coords : (count, k) int64 array or None
    """
    rmat = np.ascontiguousarray(rmat, dtype=np.float64)
    k = rmat.shape[0]
    diag = np.diag(rmat).copy()
    ratio = rmat / diag[:, None]
    c = np.zeros(k, dtype=np.int64)
    partial = np.zeros(k + 1)
    chunks = []
    count = 0

    def bounds(i):
        center = -float(ratio[i, i + 1:] @ c[i + 1:])
        room = radius_sq - partial[i + 1]
        if room < 0.0:
            return center, 1, 0
        t = math.sqrt(room) / diag[i]
        return center, math.ceil(center - t - _EDGE), math.floor(center + t + _EDGE)

    def innermost():
        nonlocal count
        center, lo, hi = bounds(0)
        if hi < lo:
            return
        vals = np.arange(lo, hi + 1, dtype=np.int64)
        terms = partial[1] + diag[0] ** 2 * (vals - center) ** 2
        vals = vals[terms <= radius_sq]
        if vals.size == 0:
            return
        count += vals.size
        if collect and count <= cap:
            block = np.empty((vals.size, k), dtype=np.int64)
            block[:, 0] = vals
            block[:, 1:] = c[1:]
            chunks.append(block)

    def descend(i):
        if count > cap:
            return
        if i == 0:
            innermost()
            return
        center, lo, hi = bounds(i)
        for v in range(lo, hi + 1):
            val = partial[i + 1] + diag[i] ** 2 * (v - center) ** 2
            if val > radius_sq:
                continue
            c[i] = v
            partial[i] = val
            descend(i - 1)
            if count > cap:
                return
        c[i] = 0

    descend(k - 1)
    if count > cap:
        return cap + 1, None
    if not collect:
        return count, None
    if chunks:
        return count, np.concatenate(chunks)
    return count, np.zeros((0, k), dtype=np.int64)


def ml_argmin(Q, z, coords):
    """Index minimising ``c^T Q_t c - 2 z_t . c`` over the rows c of ``coords``.

    Ties go to the smallest index. ``Q`` has shape (b, k, k), ``z`` (b, k).
    """
    Q = np.asarray(Q, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64)
    b, k = z.shape
    iu, ju = np.triu_indices(k)
    weight = np.where(iu == ju, 1.0, 2.0)
    features = np.concatenate([coords[:, iu] * coords[:, ju], coords], axis=1)
    n_words = coords.shape[0]
    out = np.empty(b, dtype=np.int64)
    # keep the (n_words, batch) metric block around 32 MB
    step = max(1, 4_000_000 // max(n_words, 1))
    for s in range(0, b, step):
        e = min(b, s + step)
        w = np.concatenate([Q[s:e][:, iu, ju] * weight, -2.0 * z[s:e]], axis=1)
        out[s:e] = np.argmin(features @ w.T, axis=0)
    return out
