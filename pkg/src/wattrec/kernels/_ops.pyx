# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernels.

Same arithmetic, same order as ``wattrec.kernels.pure``; only the speed
differs.  Keep the two files in lockstep: the parity tests assert that
trained parameters match to machine precision.
"""

from libc.math cimport exp, sqrt

import numpy as np


cdef inline double _sigmoid(double x) nogil:
    if x > 35.0:
        return 1.0
    if x < -35.0:
        return 0.0
    return 1.0 / (1.0 + exp(-x))


def svd_epoch(int[::1] users, int[::1] items, double[::1] ratings,
              int[::1] order, double mu, double[::1] bu, double[::1] bi,
              double[:, ::1] p, double[:, ::1] q, double lr, double reg):
    """One SGD epoch of biased matrix factorization, in sample order."""
    cdef Py_ssize_t n_factors = p.shape[1]
    cdef Py_ssize_t k, f
    cdef int s, u, i
    cdef double r, dot, err, puf, qif

    for k in range(order.shape[0]):
        s = order[k]
        u = users[s]
        i = items[s]
        r = ratings[s]
        dot = 0.0
        for f in range(n_factors):
            dot += p[u, f] * q[i, f]
        err = r - (mu + bu[u] + bi[i] + dot)
        bu[u] += lr * (err - reg * bu[u])
        bi[i] += lr * (err - reg * bi[i])
        for f in range(n_factors):
            puf = p[u, f]
            qif = q[i, f]
            p[u, f] += lr * (err * qif - reg * puf)
            q[i, f] += lr * (err * puf - reg * qif)


def svdpp_epoch(int[::1] users, int[::1] items, double[::1] ratings,
                int[::1] order, double mu, double[::1] bu, double[::1] bi,
                double[:, ::1] p, double[:, ::1] q, double[:, ::1] y,
                int[::1] rated_indptr, int[::1] rated_items,
                double lr, double reg):
    """One SGD epoch of SVD++ with implicit item factors y."""
    cdef Py_ssize_t n_factors = p.shape[1]
    cdef Py_ssize_t k, f, jj
    cdef int s, u, i, j, start, end
    cdef double r, dot, err, puf, qif, sqrt_nu, scale
    cdef double[::1] impl = np.zeros(n_factors)
    cdef double[::1] q_old = np.zeros(n_factors)

    for k in range(order.shape[0]):
        s = order[k]
        u = users[s]
        i = items[s]
        r = ratings[s]
        start = rated_indptr[u]
        end = rated_indptr[u + 1]
        sqrt_nu = sqrt(<double>(end - start))

        for f in range(n_factors):
            impl[f] = 0.0
        for jj in range(start, end):
            j = rated_items[jj]
            for f in range(n_factors):
                impl[f] += y[j, f]
        dot = 0.0
        for f in range(n_factors):
            impl[f] /= sqrt_nu
            dot += q[i, f] * (p[u, f] + impl[f])

        err = r - (mu + bu[u] + bi[i] + dot)
        bu[u] += lr * (err - reg * bu[u])
        bi[i] += lr * (err - reg * bi[i])
        for f in range(n_factors):
            puf = p[u, f]
            qif = q[i, f]
            q_old[f] = qif
            p[u, f] += lr * (err * qif - reg * puf)
            q[i, f] += lr * (err * (puf + impl[f]) - reg * qif)
        scale = err / sqrt_nu
        for jj in range(start, end):
            j = rated_items[jj]
            for f in range(n_factors):
                y[j, f] += lr * (scale * q_old[f] - reg * y[j, f])


cdef inline bint _in_sorted(int[::1] arr, int lo, int hi, int x) nogil:
    cdef int mid, v
    while lo < hi:
        mid = (lo + hi) // 2
        v = arr[mid]
        if v == x:
            return True
        if v < x:
            lo = mid + 1
        else:
            hi = mid
    return False


def bpr_epoch(int[::1] pos_users, int[::1] pos_items, int[::1] order,
              int[:, ::1] neg_candidates, int[::1] pos_indptr,
              int[::1] pos_sorted_items, double[:, ::1] p, double[:, ::1] q,
              double lr, double reg):
    """One epoch of pairwise-ranking SGD over sampled triples."""
    cdef Py_ssize_t n_factors = p.shape[1]
    cdef Py_ssize_t n_tries = neg_candidates.shape[1]
    cdef Py_ssize_t row, f, t
    cdef int s, u, i, j, cand, lo, hi
    cdef double x, z, puf, qif, qjf
    cdef long updates = 0

    for row in range(order.shape[0]):
        s = order[row]
        u = pos_users[s]
        i = pos_items[s]
        lo = pos_indptr[u]
        hi = pos_indptr[u + 1]
        j = -1
        for t in range(n_tries):
            cand = neg_candidates[row, t]
            if not _in_sorted(pos_sorted_items, lo, hi, cand):
                j = cand
                break
        if j < 0:
            continue

        x = 0.0
        for f in range(n_factors):
            x += p[u, f] * (q[i, f] - q[j, f])
        z = 1.0 - _sigmoid(x)
        for f in range(n_factors):
            puf = p[u, f]
            qif = q[i, f]
            qjf = q[j, f]
            p[u, f] += lr * (z * (qif - qjf) - reg * puf)
            q[i, f] += lr * (z * puf - reg * qif)
            q[j, f] += lr * (-z * puf - reg * qjf)
        updates += 1
    return updates


def logmf_epoch(int[::1] users, int[::1] items, double[::1] labels,
                int[::1] order, double[::1] bu, double[::1] bi,
                double[:, ::1] p, double[:, ::1] q, double lr, double reg):
    """One SGD epoch of logistic matrix factorization on labeled pairs."""
    cdef Py_ssize_t n_factors = p.shape[1]
    cdef Py_ssize_t k, f
    cdef int s, u, i
    cdef double t, x, g, puf, qif

    for k in range(order.shape[0]):
        s = order[k]
        u = users[s]
        i = items[s]
        t = labels[s]
        x = bu[u] + bi[i]
        for f in range(n_factors):
            x += p[u, f] * q[i, f]
        g = t - _sigmoid(x)
        bu[u] += lr * (g - reg * bu[u])
        bi[i] += lr * (g - reg * bi[i])
        for f in range(n_factors):
            puf = p[u, f]
            qif = q[i, f]
            p[u, f] += lr * (g * qif - reg * puf)
            q[i, f] += lr * (g * puf - reg * qif)
