"""Pure-Python training kernels.

Fallback used when the compiled extension is unavailable (or forced via
WATTREC_PURE=1).  Each function performs exactly the same arithmetic in
exactly the same order as its compiled twin in ``_ops.pyx``, so trained
parameters agree to machine precision across backends.  These loops are
orders of magnitude slower; see benchmarks/kernel_bench.py.
"""

from __future__ import annotations

import math


def _sigmoid(x: float) -> float:
    # clamp keeps math.exp in range; same constant as the compiled kernel
    if x > 35.0:
        return 1.0
    if x < -35.0:
        return 0.0
    return 1.0 / (1.0 + math.exp(-x))


def svd_epoch(users, items, ratings, order, mu, bu, bi, p, q, lr, reg):
    """One SGD epoch of biased matrix factorization, in sample order."""
    n_factors = p.shape[1]
    for s in order:
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


def svdpp_epoch(users, items, ratings, order, mu, bu, bi, p, q, y,
                rated_indptr, rated_items, lr, reg):
    """One SGD epoch of SVD++ with implicit item factors y.

    ``rated_indptr``/``rated_items`` is a CSR view of each user's rated
    item set N(u); the implicit profile is rebuilt from the current y for
    every sample, and y updates use the pre-update item factors.
    """
    n_factors = p.shape[1]
    impl = [0.0] * n_factors
    q_old = [0.0] * n_factors
    for s in order:
        u = users[s]
        i = items[s]
        r = ratings[s]
        start = rated_indptr[u]
        end = rated_indptr[u + 1]
        sqrt_nu = math.sqrt(end - start)

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


def _in_sorted(arr, lo, hi, x) -> bool:
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


def bpr_epoch(pos_users, pos_items, order, neg_candidates, pos_indptr,
              pos_sorted_items, p, q, lr, reg):
    """One epoch of pairwise-ranking SGD over sampled triples.

    Each step takes a shuffled positive (u, i) and the first pre-drawn
    candidate item that is not among u's positives; steps whose candidates
    all collide are skipped.  Returns the number of performed updates.
    """
    n_factors = p.shape[1]
    n_tries = neg_candidates.shape[1]
    updates = 0
    for row in range(len(order)):
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


def logmf_epoch(users, items, labels, order, bu, bi, p, q, lr, reg):
    """One SGD epoch of logistic matrix factorization on labeled pairs."""
    n_factors = p.shape[1]
    for s in order:
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
