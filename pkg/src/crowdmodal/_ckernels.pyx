# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; see _pykernels for the reference semantics."""
import numpy as np

cimport numpy as cnp
from libc.math cimport floor, ceil

cnp.import_array()


def squeeze_accumulate(double complex[:, :] W, long[:, :] bins, double[:] weight,
                       Py_ssize_t n_out):
    cdef Py_ssize_t na = W.shape[0], nb = W.shape[1]
    cdef Py_ssize_t a, b, k
    cdef double w
    out = np.zeros((n_out, nb), dtype=np.complex128)
    cdef double complex[:, :] T = out
    for a in range(na):
        w = weight[a]
        for b in range(nb):
            k = bins[a, b]
            if k >= 0:
                T[k, b] = T[k, b] + W[a, b] * w
    return out


def column_peaks(double[:, :] A):
    cdef Py_ssize_t nf = A.shape[0], nb = A.shape[1]
    cdef Py_ssize_t b, i, j, n = 0
    cdef double v
    # strict maxima are at least two rows apart
    rows_a = np.empty(nb * (nf // 2 + 1), dtype=np.int64)
    cols_a = np.empty(nb * (nf // 2 + 1), dtype=np.int64)
    cdef cnp.int64_t[:] rows = rows_a
    cdef cnp.int64_t[:] cols = cols_a
    for b in range(nb):
        i = 1
        while i < nf - 1:
            v = A[i, b]
            if v > A[i - 1, b]:
                j = i
                while j + 1 < nf and A[j + 1, b] == v:
                    j += 1
                if j + 1 < nf and A[j + 1, b] < v:
                    rows[n] = i
                    cols[n] = b
                    n += 1
                i = j + 1
            else:
                i += 1
    return rows_a[:n].copy(), cols_a[:n].copy()


def segment_accumulate(long[:] bins, double[:] r, double[:] w, double s1, double ds,
                       Py_ssize_t M, double half, Py_ssize_t n_bins):
    cdef Py_ssize_t n = bins.shape[0]
    cdef Py_ssize_t p, m, m0, m1
    cdef double s
    out = np.zeros((n_bins, M), dtype=np.float64)
    cdef double[:, :] P = out
    for p in range(n):
        m0 = <Py_ssize_t>floor((r[p] - half - s1) / ds)
        m1 = <Py_ssize_t>ceil((r[p] + half - s1) / ds)
        if m0 < 0:
            m0 = 0
        if m1 > M - 1:
            m1 = M - 1
        for m in range(m0, m1 + 1):
            s = s1 + m * ds
            if s - half <= r[p] and r[p] < s + half:
                P[bins[p], m] += w[p]
    return out
