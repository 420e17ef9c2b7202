# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte Carlo reduction kernels.

Same contracts as numpy_backend; loops are fused so the (trials, n)
inputs are consumed in one pass without temporaries. Float reductions
use Kahan compensation so they agree with numpy to ~1e-12.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def rowmax_mean_std(q):
    cdef double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t trials = qv.shape[0], n = qv.shape[1]
    cdef Py_ssize_t t, j
    cdef double m, v, s = 0.0, c = 0.0, y, tmp
    cdef double s2 = 0.0, c2 = 0.0, mean, var
    cdef cnp.ndarray[cnp.float64_t, ndim=1] maxima = np.empty(trials, dtype=np.float64)
    for t in range(trials):
        m = qv[t, 0]
        for j in range(1, n):
            v = qv[t, j]
            if v > m:
                m = v
        maxima[t] = m
        y = m - c
        tmp = s + y
        c = (tmp - s) - y
        s = tmp
    mean = s / trials
    if trials < 2:
        return mean, 0.0
    for t in range(trials):
        v = maxima[t] - mean
        y = v * v - c2
        tmp = s2 + y
        c2 = (tmp - s2) - y
        s2 = tmp
    var = s2 / (trials - 1)
    return mean, var ** 0.5


def rowargmax(q):
    cdef double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t trials = qv.shape[0], n = qv.shape[1]
    cdef Py_ssize_t t, j, best
    cdef double m
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        best = 0
        m = qv[t, 0]
        for j in range(1, n):
            if qv[t, j] > m:
                m = qv[t, j]
                best = j
        out[t] = best
    return out


def plurality_winners(votes, n_candidates, tie_u):
    cdef long long[:, ::1] vv = np.ascontiguousarray(votes, dtype=np.int64)
    cdef double[::1] uv = np.ascontiguousarray(tie_u, dtype=np.float64)
    cdef Py_ssize_t trials = vv.shape[0], voters = vv.shape[1]
    cdef Py_ssize_t k = n_candidates
    cdef Py_ssize_t t, j, best_count, n_tied, pick, seen
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(k, dtype=np.int64)
    cdef long long[::1] cv = counts
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        for j in range(k):
            cv[j] = 0
        for j in range(voters):
            cv[vv[t, j]] += 1
        best_count = 0
        for j in range(k):
            if cv[j] > best_count:
                best_count = cv[j]
        n_tied = 0
        for j in range(k):
            if cv[j] == best_count:
                n_tied += 1
        pick = <Py_ssize_t>(uv[t] * n_tied)
        if pick > n_tied - 1:
            pick = n_tied - 1
        seen = 0
        for j in range(k):
            if cv[j] == best_count:
                if seen == pick:
                    out[t] = j
                    break
                seen += 1
    return out


def cjt_correct_count(mix_u, shared_u, vote_u, double p, double rho):
    cdef double[::1] mv = np.ascontiguousarray(mix_u, dtype=np.float64)
    cdef double[::1] sv = np.ascontiguousarray(shared_u, dtype=np.float64)
    cdef double[:, ::1] uv = np.ascontiguousarray(vote_u, dtype=np.float64)
    cdef Py_ssize_t trials = uv.shape[0], n = uv.shape[1]
    cdef Py_ssize_t t, j, votes, needed = n // 2
    cdef long long correct = 0
    for t in range(trials):
        if mv[t] < rho:
            if sv[t] < p:
                correct += 1
        else:
            votes = 0
            for j in range(n):
                if uv[t, j] < p:
                    votes += 1
            if votes > needed:
                correct += 1
    return int(correct)
