# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot loops; same contracts as _pykernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


cdef inline double _lse_col(double[:, ::1] a, Py_ssize_t i, double[:, ::1] trans, Py_ssize_t j, Py_ssize_t c) noexcept nogil:
    # log sum_k exp(a[i, k] + trans[k, j])
    cdef double m = -INFINITY, s = 0.0, v
    cdef Py_ssize_t k
    for k in range(c):
        v = a[i, k] + trans[k, j]
        if v > m:
            m = v
    if m == -INFINITY:
        return m
    for k in range(c):
        s += exp(a[i, k] + trans[k, j] - m)
    return m + log(s)


def crf_log_partition(emissions, trans, start, stop):
    cdef double[:, ::1] e = np.ascontiguousarray(emissions, dtype=np.float64)
    cdef double[:, ::1] t = np.ascontiguousarray(trans, dtype=np.float64)
    cdef double[::1] st = np.ascontiguousarray(start, dtype=np.float64)
    cdef double[::1] sp = np.ascontiguousarray(stop, dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0], c = e.shape[1], i, j
    cdef double[:, ::1] alpha = np.empty((2, c))
    cdef double m, s
    with nogil:
        for j in range(c):
            alpha[0, j] = st[j] + e[0, j]
        for i in range(1, n):
            for j in range(c):
                alpha[i % 2, j] = _lse_col(alpha, (i - 1) % 2, t, j, c) + e[i, j]
        m = -INFINITY
        for j in range(c):
            if alpha[(n - 1) % 2, j] + sp[j] > m:
                m = alpha[(n - 1) % 2, j] + sp[j]
        s = 0.0
        for j in range(c):
            s += exp(alpha[(n - 1) % 2, j] + sp[j] - m)
    return m + log(s)


def crf_forward_backward(emissions, trans, start, stop):
    cdef double[:, ::1] e = np.ascontiguousarray(emissions, dtype=np.float64)
    cdef double[:, ::1] t = np.ascontiguousarray(trans, dtype=np.float64)
    cdef double[::1] st = np.ascontiguousarray(start, dtype=np.float64)
    cdef double[::1] sp = np.ascontiguousarray(stop, dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0], c = e.shape[1], i, j, k
    alpha_a = np.empty((n, c))
    beta_a = np.empty((n, c))
    marg_a = np.empty((n, c))
    pair_a = np.zeros((c, c))
    cdef double[:, ::1] alpha = alpha_a
    cdef double[:, ::1] beta = beta_a
    cdef double[:, ::1] marg = marg_a
    cdef double[:, ::1] pair = pair_a
    cdef double m, s, v, log_z
    with nogil:
        for j in range(c):
            alpha[0, j] = st[j] + e[0, j]
        for i in range(1, n):
            for j in range(c):
                alpha[i, j] = _lse_col(alpha, i - 1, t, j, c) + e[i, j]
        for k in range(c):
            beta[n - 1, k] = sp[k]
        for i in range(n - 2, -1, -1):
            for k in range(c):
                m = -INFINITY
                for j in range(c):
                    v = t[k, j] + e[i + 1, j] + beta[i + 1, j]
                    if v > m:
                        m = v
                s = 0.0
                for j in range(c):
                    s += exp(t[k, j] + e[i + 1, j] + beta[i + 1, j] - m)
                beta[i, k] = m + log(s)
        m = -INFINITY
        for j in range(c):
            if alpha[n - 1, j] + sp[j] > m:
                m = alpha[n - 1, j] + sp[j]
        s = 0.0
        for j in range(c):
            s += exp(alpha[n - 1, j] + sp[j] - m)
        log_z = m + log(s)
        for i in range(n):
            for j in range(c):
                marg[i, j] = exp(alpha[i, j] + beta[i, j] - log_z)
        for i in range(1, n):
            for k in range(c):
                for j in range(c):
                    pair[k, j] += exp(alpha[i - 1, k] + t[k, j] + e[i, j] + beta[i, j] - log_z)
    return log_z, marg_a, pair_a


def viterbi(emissions, trans, start, stop):
    cdef double[:, ::1] e = np.ascontiguousarray(emissions, dtype=np.float64)
    cdef double[:, ::1] t = np.ascontiguousarray(trans, dtype=np.float64)
    cdef double[::1] st = np.ascontiguousarray(start, dtype=np.float64)
    cdef double[::1] sp = np.ascontiguousarray(stop, dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0], c = e.shape[1], i, j, k, arg
    back_a = np.zeros((n, c), dtype=np.int64)
    path_a = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] back = back_a
    cdef cnp.int64_t[::1] path = path_a
    cdef double[:, ::1] delta = np.empty((2, c))
    cdef double best, v
    with nogil:
        for j in range(c):
            delta[0, j] = st[j] + e[0, j]
        for i in range(1, n):
            for j in range(c):
                best = -INFINITY
                arg = 0
                for k in range(c):
                    v = delta[(i - 1) % 2, k] + t[k, j]
                    if v > best:
                        best = v
                        arg = k
                back[i, j] = arg
                delta[i % 2, j] = best + e[i, j]
        best = -INFINITY
        arg = 0
        for j in range(c):
            v = delta[(n - 1) % 2, j] + sp[j]
            if v > best:
                best = v
                arg = j
        path[n - 1] = arg
        for i in range(n - 1, 0, -1):
            path[i - 1] = back[i, path[i]]
    return path_a, best


def scatter_add_rows(target, index, values):
    cdef double[:, ::1] tgt = target
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(index, dtype=np.int64)
    cdef double[:, ::1] val = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t r, d, dim = tgt.shape[1]
    if val.shape[0] != idx.shape[0] or val.shape[1] != dim:
        raise ValueError("index/values shape mismatch")
    with nogil:
        for r in range(idx.shape[0]):
            for d in range(dim):
                tgt[idx[r], d] += val[r, d]
