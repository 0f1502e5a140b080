# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Fincke-Pohst enumeration and fused ML argmin.

Both mirror ``_pykernels`` exactly (same arithmetic order), so the two
backends agree point for point.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, ceil, INFINITY
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

cdef double _EDGE = 1e-7


def fp_enumerate(const double[:, ::1] rmat, double radius_sq, Py_ssize_t cap, bint collect):
    cdef Py_ssize_t k = rmat.shape[0]
    cdef Py_ssize_t i, j, count = 0, capacity = 1024
    cdef double room, t, diff, val, s
    cdef cnp.int64_t v
    cdef double[::1] diag = np.empty(k)
    cdef double[:, ::1] ratio = np.empty((k, k))
    cdef double[::1] center = np.zeros(k)
    cdef double[::1] partial = np.zeros(k + 1)
    cdef cnp.int64_t[::1] c = np.zeros(k, dtype=np.int64)
    cdef cnp.int64_t[::1] hi = np.zeros(k, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] buf
    out = None

    for i in range(k):
        diag[i] = rmat[i, i]
    for i in range(k):
        for j in range(k):
            ratio[i, j] = rmat[i, j] / diag[i]
    if collect:
        out = np.empty((capacity, k), dtype=np.int64)
        buf = out

    # set up the top level
    i = k - 1
    center[i] = 0.0
    room = radius_sq - partial[i + 1]
    if room < 0.0:
        return 0, (np.zeros((0, k), dtype=np.int64) if collect else None)
    t = sqrt(room) / diag[i]
    c[i] = <cnp.int64_t>ceil(center[i] - t - _EDGE)
    hi[i] = <cnp.int64_t>floor(center[i] + t + _EDGE)

    while True:
        if c[i] > hi[i]:
            if i == k - 1:
                break
            c[i] = 0
            i += 1
            c[i] += 1
            continue
        diff = c[i] - center[i]
        val = partial[i + 1] + diag[i] * diag[i] * diff * diff
        if val > radius_sq:
            c[i] += 1
            continue
        if i == 0:
            count += 1
            if count > cap:
                return cap + 1, None
            if collect:
                if count > capacity:
                    capacity *= 2
                    grown = np.empty((capacity, k), dtype=np.int64)
                    grown[:count - 1] = out[:count - 1]
                    out = grown
                    buf = out
                buf[count - 1, 0] = c[0]
                for j in range(1, k):
                    buf[count - 1, j] = c[j]
            c[0] += 1
            continue
        partial[i] = val
        i -= 1
        s = 0.0
        for j in range(i + 1, k):
            s = s + ratio[i, j] * c[j]
        center[i] = -s
        room = radius_sq - partial[i + 1]
        if room < 0.0:
            c[i] = 1
            hi[i] = 0
            continue
        t = sqrt(room) / diag[i]
        c[i] = <cnp.int64_t>ceil(center[i] - t - _EDGE)
        hi[i] = <cnp.int64_t>floor(center[i] + t + _EDGE)

    if collect:
        return count, np.asarray(out[:count]).copy()
    return count, None


def ml_argmin(Q, z, coords):
    """Index minimising ``c^T Q_t c - 2 z_t . c`` over the rows c of ``coords``.

    The metric is a dot product between a per-codeword feature row
    (products ``c_a c_m`` for a <= m, then ``c``) and a per-trial weight
    row. Tiles of trials go through one BLAS product each and the argmin
    runs over the tile while it is still in cache. Ties between computed
    metrics go to the smallest index; rounding inside the BLAS product can
    split mathematically equal metrics, so duplicate rows may differ from
    the fallback.
    """
    Q = np.asarray(Q, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64)
    k = z.shape[1]
    iu, ju = np.triu_indices(k)
    weight = np.where(iu == ju, 1.0, 2.0)
    # (P, N) row-major is the column-major N x P feature matrix BLAS wants
    cdef const double[:, ::1] feat = np.ascontiguousarray(
        np.concatenate([coords[:, iu] * coords[:, ju], coords], axis=1).T)
    cdef const double[:, ::1] w = np.ascontiguousarray(
        np.concatenate([Q[:, iu, ju] * weight, -2.0 * z], axis=1))
    cdef int b = w.shape[0], n_feat = w.shape[1], n_words = feat.shape[1]
    cdef int tile = max(1, min(b, 262144 // max(n_words, 1)))
    cdef double[::1] buf = np.empty(max(tile * n_words, 1))
    result = np.empty(b, dtype=np.int64)
    cdef cnp.int64_t[::1] out = result
    cdef int s, e, t, j, n_cols, best_j
    cdef double best, one = 1.0, zero = 0.0
    cdef double* col
    cdef char trans = b'N'
    if b == 0:
        return result
    with nogil:
        s = 0
        while s < b:
            e = s + tile
            if e > b:
                e = b
            n_cols = e - s
            dgemm(&trans, &trans, &n_words, &n_cols, &n_feat, &one,
                  <double*>&feat[0, 0], &n_words, <double*>&w[s, 0], &n_feat,
                  &zero, &buf[0], &n_words)
            for t in range(n_cols):
                col = &buf[t * n_words]
                best = INFINITY
                best_j = 0
                for j in range(n_words):
                    if col[j] < best:
                        best = col[j]
                        best_j = j
                out[s + t] = best_j
            s = e
    return result
