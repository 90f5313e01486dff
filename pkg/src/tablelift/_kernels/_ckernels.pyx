# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Arithmetic mirrors _pykernels operation-for-operation."""

from libc.stdint cimport int32_t, int64_t, uint64_t

import numpy as np


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


def minhash_block(const uint64_t[::1] hashes, const int64_t[::1] offsets,
                  const uint64_t[::1] seeds):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t H = seeds.shape[0]
    out_arr = np.full((n, H), 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    cdef uint64_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, h, t
    cdef int64_t lo, hi
    cdef uint64_t seed, v, best
    with nogil:
        for i in range(n):
            lo = offsets[i]
            hi = offsets[i + 1]
            if hi <= lo:
                continue
            for h in range(H):
                seed = seeds[h]
                best = <uint64_t>0xFFFFFFFFFFFFFFFF
                for t in range(lo, hi):
                    v = _mix64(hashes[t] ^ seed)
                    if v < best:
                        best = v
                out[i, h] = best
    return out_arr


def bm25_accumulate(const int64_t[::1] doc_ids, const double[::1] tfs,
                    const double[::1] weights, const double[::1] knorm,
                    double k1_plus_1, double[::1] scores):
    cdef Py_ssize_t e, n = doc_ids.shape[0]
    cdef int64_t d
    cdef double tf
    with nogil:
        for e in range(n):
            d = doc_ids[e]
            tf = tfs[e]
            scores[d] += weights[e] * ((tf * k1_plus_1) / (tf + knorm[d]))


def lasso_sweeps(const double[:, ::1] xt, const double[::1] y, double lam,
                 double tol, int max_sweeps, double[::1] w):
    cdef Py_ssize_t p = xt.shape[0]
    cdef Py_ssize_t n = xt.shape[1]
    cdef Py_ssize_t i, j
    cdef int sweeps = 0
    cdef double zj, wj, rho, wn, delta, max_delta, acc, diff
    col_sq_arr = np.zeros(p)
    r_arr = np.empty(n)
    cdef double[::1] col_sq = col_sq_arr
    cdef double[::1] r = r_arr
    with nogil:
        for j in range(p):
            acc = 0.0
            for i in range(n):
                acc += xt[j, i] * xt[j, i]
            col_sq[j] = acc / n
        for i in range(n):
            acc = y[i]
            for j in range(p):
                if w[j] != 0.0:
                    acc -= xt[j, i] * w[j]
            r[i] = acc
        while sweeps < max_sweeps:
            sweeps += 1
            max_delta = 0.0
            for j in range(p):
                zj = col_sq[j]
                if zj == 0.0:
                    continue
                wj = w[j]
                acc = 0.0
                for i in range(n):
                    acc += xt[j, i] * r[i]
                rho = acc / n + zj * wj
                if rho > lam:
                    wn = (rho - lam) / zj
                elif rho < -lam:
                    wn = (rho + lam) / zj
                else:
                    wn = 0.0
                if wn != wj:
                    diff = wn - wj
                    for i in range(n):
                        r[i] -= diff * xt[j, i]
                    w[j] = wn
                    delta = diff if diff >= 0.0 else -diff
                    if delta > max_delta:
                        max_delta = delta
            if max_delta < tol:
                break
    return sweeps


def best_split_classification(const double[::1] vals, const int32_t[::1] classes,
                              int n_classes, int min_leaf):
    cdef Py_ssize_t n = vals.shape[0]
    cdef double nf = <double>n
    cdef Py_ssize_t i, c
    cdef double sp, sl, sr, gl, gr, cost, best_cost, parent, fi
    cdef Py_ssize_t best_pos = -1
    total_arr = np.zeros(n_classes)
    left_arr = np.zeros(n_classes)
    cdef double[::1] total = total_arr
    cdef double[::1] left = left_arr
    with nogil:
        for i in range(n):
            total[classes[i]] += 1.0
        sp = 0.0
        for c in range(n_classes):
            sp += total[c] * total[c]
        parent = 1.0 - sp / (nf * nf)
    if n < 2 * min_leaf:
        return -1, np.inf, parent
    best_cost = np.inf
    with nogil:
        for i in range(1, n):
            left[classes[i - 1]] += 1.0
            if vals[i - 1] == vals[i]:
                continue
            if i < min_leaf or n - i < min_leaf:
                continue
            fi = <double>i
            sl = 0.0
            sr = 0.0
            for c in range(n_classes):
                sl += left[c] * left[c]
                sr += (total[c] - left[c]) * (total[c] - left[c])
            gl = 1.0 - sl / (fi * fi)
            gr = 1.0 - sr / ((nf - fi) * (nf - fi))
            cost = (fi * gl + (nf - fi) * gr) / nf
            if cost < best_cost:
                best_cost = cost
                best_pos = i
    if best_pos < 0:
        return -1, np.inf, parent
    return best_pos, best_cost, parent


def best_split_regression(const double[::1] vals, const double[::1] targets,
                          int min_leaf):
    cdef Py_ssize_t n = vals.shape[0]
    cdef double nf = <double>n
    cdef Py_ssize_t i
    cdef double s_tot, q_tot, s_l, q_l, ml, mr, vl, vr, cost, best_cost, parent, fi, t
    cdef Py_ssize_t best_pos = -1
    with nogil:
        s_tot = 0.0
        q_tot = 0.0
        for i in range(n):
            t = targets[i]
            s_tot += t
            q_tot += t * t
        ml = s_tot / nf
        parent = q_tot / nf - ml * ml
        if parent < 0.0:
            parent = 0.0
    if n < 2 * min_leaf:
        return -1, np.inf, parent
    best_cost = np.inf
    with nogil:
        s_l = 0.0
        q_l = 0.0
        for i in range(1, n):
            t = targets[i - 1]
            s_l += t
            q_l += t * t
            if vals[i - 1] == vals[i]:
                continue
            if i < min_leaf or n - i < min_leaf:
                continue
            fi = <double>i
            ml = s_l / fi
            vl = q_l / fi - ml * ml
            if vl < 0.0:
                vl = 0.0
            mr = (s_tot - s_l) / (nf - fi)
            vr = (q_tot - q_l) / (nf - fi) - mr * mr
            if vr < 0.0:
                vr = 0.0
            cost = (fi * vl + (nf - fi) * vr) / nf
            if cost < best_cost:
                best_cost = cost
                best_pos = i
    if best_pos < 0:
        return -1, np.inf, parent
    return best_pos, best_cost, parent
