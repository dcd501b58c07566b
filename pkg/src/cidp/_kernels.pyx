# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt

cnp.import_array()


def link_argmax(Q, li, lj, eligible):
    cdef cnp.int64_t[:, :] q = np.ascontiguousarray(Q, dtype=np.int64)
    cdef cnp.int64_t[:] a = np.ascontiguousarray(li, dtype=np.int64)
    cdef cnp.int64_t[:] b = np.ascontiguousarray(lj, dtype=np.int64)
    cdef cnp.uint8_t[:] ok = np.ascontiguousarray(eligible, dtype=np.uint8)
    cdef Py_ssize_t L = a.shape[0], F = q.shape[1], l, f
    best_arr = np.full(L, -1, dtype=np.int64)
    w_arr = np.zeros(L, dtype=np.int64)
    cdef cnp.int64_t[:] best = best_arr
    cdef cnp.int64_t[:] wout = w_arr
    cdef cnp.int64_t w, bw
    cdef Py_ssize_t bf
    for l in range(L):
        bw = 0
        bf = -1
        for f in range(F):
            if not ok[f]:
                continue
            w = q[a[l], f] - q[b[l], f]
            if w > bw:
                bw = w
                bf = f
        best[l] = bf
        wout[l] = bw
    return best_arr, w_arr


def soc_barrier(R, I, s, double eta):
    cdef double[:, :] r = np.ascontiguousarray(R, dtype=np.float64)
    cdef double[:, :] im = np.ascontiguousarray(I, dtype=np.float64)
    cdef double[:] x = np.ascontiguousarray(s, dtype=np.float64)
    cdef Py_ssize_t L = r.shape[0], M = r.shape[1], l, m
    if eta <= 0.0:
        return None
    grad_arr = np.zeros(M + 1)
    H_arr = np.empty((M + 1, M + 1))
    # rows whose Gram matrix is the (s, s) block: sqrt(2/D) R_l, sqrt(2/D) I_l, 2 (ur R_l + ui I_l) / D
    X_arr = np.empty((3 * L, M))
    cdef double[:] g = grad_arr
    cdef double[:, :] H = H_arr
    cdef double[:, :] X = X_arr
    cdef double ur, ui, D, inv, sq, val = 0.0, ge, gm, hmm = 0.0
    cross_arr = np.zeros(M)
    cdef double[:] cross = cross_arr
    for l in range(L):
        ur = 0.0
        ui = 0.0
        for m in range(M):
            ur += r[l, m] * x[m]
            ui += im[l, m] * x[m]
        D = eta * eta - ur * ur - ui * ui
        if D <= 0.0:
            return None
        inv = 1.0 / D
        sq = sqrt(2.0 * inv)
        val -= log(D)
        ge = 2.0 * eta * inv
        for m in range(M):
            gm = 2.0 * (ur * r[l, m] + ui * im[l, m]) * inv
            g[m] += gm
            X[l, m] = sq * r[l, m]
            X[L + l, m] = sq * im[l, m]
            X[2 * L + l, m] = gm
            cross[m] -= gm * ge
        g[M] -= ge
        hmm += ge * ge - 2.0 * inv
    H_arr[:M, :M] = X_arr.T @ X_arr
    for m in range(M):
        H[m, M] = cross[m]
        H[M, m] = cross[m]
    H[M, M] = hmm
    return val, grad_arr, H_arr


def racbf_hops(v, double t_align, double dmax, double alpha, double d0=0.0):
    cdef double[:] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0], k
    delta_arr = np.zeros(n)
    db_arr = np.zeros(n)
    da_arr = np.zeros(n)
    cdef double[:] delta = delta_arr
    cdef double[:] db = db_arr
    cdef double[:] da = da_arr
    cdef double d = d0, h, e
    for k in range(n):
        h = dmax - d
        if h <= 0.0:
            return delta_arr, db_arr, da_arr, k
        e = vv[k] - t_align
        if e < 0.0:
            delta[k] = -e
            e = 0.0
        if e > alpha * h * (1.0 + 1e-12):
            db[k] = d
            return delta_arr, db_arr, da_arr, k
        db[k] = d
        d = d + e
        da[k] = d
    return delta_arr, db_arr, da_arr, -1
