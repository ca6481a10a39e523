"""Implicit-feedback scorers: baselines, factor models, and neighborhoods.

All models score every training item for a user; ``recommend`` (from the
base contract) excludes seen items and breaks ties by item index.  The
factor models delegate their SGD loops to :mod:`wattrec.kernels`.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from wattrec import kernels
from wattrec.errors import CapacityError
from wattrec.models.base import RankingScorer

DEFAULT_MEMORY_BUDGET = 4 * 1024**3


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -35.0, 35.0)))


class RandomScorer(RankingScorer):
    """Seeded uniform scores; a distinct deterministic stream per user."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _fit(self, u_codes, i_codes):
        pass

    def _score_all(self, u_idx: int) -> np.ndarray:
        key = u_idx if u_idx >= 0 else self.n_users_
        rng = np.random.default_rng((self.seed, key))
        return rng.uniform(size=self.n_items_)


class PopularScorer(RankingScorer):
    """Ranks by global interaction count, identical for every user."""

    name = "popular"

    def _fit(self, u_codes, i_codes):
        self.counts_ = np.bincount(i_codes, minlength=self.n_items_).astype(np.float64)

    def _score_all(self, u_idx: int) -> np.ndarray:
        return self.counts_


class UserMeanScorer(RankingScorer):
    """Per-user-constant score (the user's activity level).

    Items are indistinguishable for a given user, so recommendation order
    comes from a seeded random tie-break instead of the default
    item-index tie-break; ranking quality is random by construction.
    """

    name = "user_mean"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _fit(self, u_codes, i_codes):
        self.activity_ = np.bincount(u_codes, minlength=self.n_users_).astype(np.float64)

    def _score_all(self, u_idx: int) -> np.ndarray:
        level = self.activity_[u_idx] if u_idx >= 0 else 0.0
        return np.full(self.n_items_, level)

    def _order_candidates(self, u_idx, scores, mask):
        cand = np.nonzero(mask)[0]
        rng = np.random.default_rng((self.seed, max(u_idx, 0), 1))
        return cand[rng.permutation(len(cand))]


class ALSImplicit(RankingScorer):
    """Confidence-weighted implicit-feedback ALS (c = 1 + alpha * r)."""

    name = "als"

    def __init__(self, n_factors: int = 50, alpha: float = 40.0, reg: float = 0.01,
                 iterations: int = 15, seed: int = 0):
        self.n_factors = n_factors
        self.alpha = alpha
        self.reg = reg
        self.iterations = iterations
        self.seed = seed

    @staticmethod
    def _solve_half(this_csr, other, alpha, reg):
        """Solve every row's normal equations against the other matrix."""
        n_rows = this_csr.shape[0]
        f = other.shape[1]
        gram = other.T @ other + reg * np.eye(f)
        out = np.empty((n_rows, f))
        indptr, indices = this_csr.indptr, this_csr.indices
        for row in range(n_rows):
            cols = indices[indptr[row]:indptr[row + 1]]
            if len(cols) == 0:
                out[row] = 0.0
                continue
            m = other[cols]
            a = gram + (m.T * alpha) @ m
            b = (1.0 + alpha) * m.sum(axis=0)
            out[row] = np.linalg.solve(a, b)
        return out

    def _fit(self, u_codes, i_codes):
        ones = np.ones(len(u_codes))
        mat = sp.csr_matrix((ones, (u_codes, i_codes)), shape=(self.n_users_, self.n_items_))
        rng = np.random.default_rng(self.seed)
        self.p_ = np.square(rng.standard_normal((self.n_users_, self.n_factors)) * 0.01)
        self.q_ = np.square(rng.standard_normal((self.n_items_, self.n_factors)) * 0.01)
        mat_t = mat.T.tocsr()
        for _ in range(self.iterations):
            self.p_ = self._solve_half(mat, self.q_, self.alpha, self.reg)
            self.q_ = self._solve_half(mat_t, self.p_, self.alpha, self.reg)
        self._mat = mat

    def training_loss(self) -> float:
        """Full confidence-weighted objective; O(users x items), toys only."""
        g = self.p_ @ self.q_.T
        pos = self._mat.toarray() > 0
        conf = 1.0 + self.alpha * pos
        pref = pos.astype(float)
        loss = float((conf * (pref - g) ** 2).sum())
        loss += self.reg * (float((self.p_**2).sum()) + float((self.q_**2).sum()))
        return loss

    def _score_all(self, u_idx: int) -> np.ndarray:
        if u_idx < 0:
            return np.zeros(self.n_items_)
        return self.p_[u_idx] @ self.q_.T


def pairwise_objective(pu, qi, qj, reg) -> float:
    """Regularized log-likelihood of one (user, pos, neg) triple."""
    x = float(np.dot(pu, qi - qj))
    # log(sigmoid(x)), stable for large |x|
    ll = -math.log1p(math.exp(-x)) if x > -35 else x
    penalty = 0.5 * reg * (np.dot(pu, pu) + np.dot(qi, qi) + np.dot(qj, qj))
    return ll - float(penalty)


def pairwise_gradient(pu, qi, qj, reg):
    """Ascent gradients of :func:`pairwise_objective` wrt pu, qi, qj."""
    x = float(np.dot(pu, qi - qj))
    z = 1.0 - _sigmoid(x)
    return (z * (qi - qj) - reg * pu,
            z * pu - reg * qi,
            -z * pu - reg * qj)


class BPR(RankingScorer):
    """Pairwise-ranking SGD over sampled (user, positive, negative) triples.

    Negatives are pre-drawn uniformly; the first candidate outside the
    user's positive set is used and a step is skipped when every candidate
    collides (users with no negatives at all never update).
    """

    name = "bpr"

    def __init__(self, n_factors: int = 50, n_epochs: int = 4, lr: float = 0.02,
                 reg: float = 0.01, seed: int = 0, n_tries: int = 8):
        self.n_factors = n_factors
        self.n_epochs = n_epochs
        self.lr = lr
        self.reg = reg
        self.seed = seed
        self.n_tries = n_tries

    def _fit(self, u_codes, i_codes):
        rng = np.random.default_rng(self.seed)
        self.p_ = rng.normal(0.0, 0.1, (self.n_users_, self.n_factors))
        self.q_ = rng.normal(0.0, 0.1, (self.n_items_, self.n_factors))
        n_pos = len(u_codes)
        for _ in range(self.n_epochs):
            order = rng.permutation(n_pos).astype(np.int32)
            cands = rng.integers(0, self.n_items_, size=(n_pos, self.n_tries),
                                 dtype=np.int32)
            kernels.bpr_epoch(u_codes, i_codes, order, cands,
                              self.seen_indptr_, self.seen_items_,
                              self.p_, self.q_, self.lr, self.reg)

    def _score_all(self, u_idx: int) -> np.ndarray:
        if u_idx < 0:
            return np.zeros(self.n_items_)
        return self.p_[u_idx] @ self.q_.T


def pointwise_objective(pu, qi, bu, bi, label, reg) -> float:
    """Regularized Bernoulli log-likelihood of one labeled pair."""
    x = float(np.dot(pu, qi)) + bu + bi
    prob = float(_sigmoid(np.array(x)))
    prob = min(max(prob, 1e-12), 1 - 1e-12)
    ll = label * math.log(prob) + (1 - label) * math.log(1 - prob)
    penalty = 0.5 * reg * (np.dot(pu, pu) + np.dot(qi, qi) + bu * bu + bi * bi)
    return ll - float(penalty)


def pointwise_gradient(pu, qi, bu, bi, label, reg):
    """Ascent gradients of :func:`pointwise_objective`."""
    x = float(np.dot(pu, qi)) + bu + bi
    g = label - float(_sigmoid(np.array(x)))
    return (g * qi - reg * pu, g * pu - reg * qi, g - reg * bu, g - reg * bi)


class LogisticMF(RankingScorer):
    """Logistic matrix factorization on positives plus sampled negatives.

    Scores are the raw logits p_u . q_i + b_u + b_i; ``probability``
    squashes them through the sigmoid.
    """

    name = "logistic_mf"

    def __init__(self, n_factors: int = 50, n_epochs: int = 2, lr: float = 0.001,
                 reg: float = 0.01, neg_per_pos: int = 1, seed: int = 0,
                 n_tries: int = 8):
        self.n_factors = n_factors
        self.n_epochs = n_epochs
        self.lr = lr
        self.reg = reg
        self.neg_per_pos = neg_per_pos
        self.seed = seed
        self.n_tries = n_tries

    def _sample_negatives(self, rng, u_codes):
        """Per positive, draw neg_per_pos items outside the user's set."""
        n_pos = len(u_codes)
        users = np.repeat(u_codes, self.neg_per_pos)
        cands = rng.integers(0, self.n_items_, size=(len(users), self.n_tries),
                             dtype=np.int32)
        chosen = np.full(len(users), -1, dtype=np.int32)
        for row, u in enumerate(users):
            lo, hi = self.seen_indptr_[u], self.seen_indptr_[u + 1]
            seen = self.seen_items_[lo:hi]
            for cand in cands[row]:
                pos = np.searchsorted(seen, cand)
                if pos >= len(seen) or seen[pos] != cand:
                    chosen[row] = cand
                    break
        ok = chosen >= 0
        return users[ok], chosen[ok]

    def _fit(self, u_codes, i_codes):
        rng = np.random.default_rng(self.seed)
        self.p_ = rng.normal(0.0, 0.1, (self.n_users_, self.n_factors))
        self.q_ = rng.normal(0.0, 0.1, (self.n_items_, self.n_factors))
        self.bu_ = np.zeros(self.n_users_)
        self.bi_ = np.zeros(self.n_items_)
        for _ in range(self.n_epochs):
            neg_u, neg_i = self._sample_negatives(rng, u_codes)
            all_u = np.concatenate([u_codes, neg_u]).astype(np.int32)
            all_i = np.concatenate([i_codes, neg_i]).astype(np.int32)
            labels = np.concatenate([np.ones(len(u_codes)), np.zeros(len(neg_u))])
            order = rng.permutation(len(all_u)).astype(np.int32)
            kernels.logmf_epoch(all_u, all_i, labels, order,
                                self.bu_, self.bi_, self.p_, self.q_,
                                self.lr, self.reg)

    def _score_all(self, u_idx: int) -> np.ndarray:
        if u_idx < 0:
            return self.bi_.copy()
        return self.bu_[u_idx] + self.bi_ + self.p_[u_idx] @ self.q_.T

    def probability(self, user, item) -> float:
        return float(_sigmoid(np.array(self.score(user, item))))


def _truncate_top_k(sim: np.ndarray, k: int) -> sp.csr_matrix:
    """Keep the k largest positive entries of each row."""
    n = sim.shape[0]
    rows, cols, vals = [], [], []
    for i in range(n):
        row = sim[i]
        if k < n:
            top = np.argpartition(-row, k - 1)[:k]
        else:
            top = np.arange(n)
        keep = top[row[top] > 0]
        rows.append(np.full(len(keep), i))
        cols.append(keep)
        vals.append(row[keep])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=sim.shape,
    )


class ItemKNN(RankingScorer):
    """Cosine item-item neighborhood over binary interaction vectors."""

    name = "item_knn"

    def __init__(self, k: int = 20, memory_budget_bytes: int = DEFAULT_MEMORY_BUDGET):
        self.k = k
        self.memory_budget_bytes = memory_budget_bytes

    def _fit(self, u_codes, i_codes):
        needed = self.n_items_ * self.n_items_ * 8
        if needed > self.memory_budget_bytes:
            raise CapacityError(
                f"{self.name}: item-similarity matrix needs ~{needed / 1024**3:.1f} GiB "
                f"for {self.n_items_} items, budget is "
                f"{self.memory_budget_bytes / 1024**3:.1f} GiB"
            )
        mat = sp.csr_matrix((np.ones(len(u_codes)), (u_codes, i_codes)),
                            shape=(self.n_users_, self.n_items_))
        co = (mat.T @ mat).toarray()
        norms = np.sqrt(np.diag(co))
        with np.errstate(invalid="ignore", divide="ignore"):
            sim = co / np.outer(norms, norms)
        sim[~np.isfinite(sim)] = 0.0
        np.fill_diagonal(sim, 0.0)
        self.sim_ = _truncate_top_k(sim, self.k)
        self._mat = mat

    def _score_all(self, u_idx: int) -> np.ndarray:
        if u_idx < 0:
            return np.zeros(self.n_items_)
        seen = self._user_items(u_idx)
        vec = np.zeros(self.n_items_)
        vec[seen] = 1.0
        return self.sim_ @ vec


class UserKNN(RankingScorer):
    """Cosine user-user neighborhood over binary interaction vectors."""

    name = "user_knn"

    def __init__(self, k: int = 20, memory_budget_bytes: int = DEFAULT_MEMORY_BUDGET):
        self.k = k
        self.memory_budget_bytes = memory_budget_bytes

    def _fit(self, u_codes, i_codes):
        needed = self.n_users_ * self.n_users_ * 8
        if needed > self.memory_budget_bytes:
            raise CapacityError(
                f"{self.name}: user-similarity matrix needs ~{needed / 1024**3:.1f} GiB "
                f"for {self.n_users_} users, budget is "
                f"{self.memory_budget_bytes / 1024**3:.1f} GiB"
            )
        mat = sp.csr_matrix((np.ones(len(u_codes)), (u_codes, i_codes)),
                            shape=(self.n_users_, self.n_items_))
        co = (mat @ mat.T).toarray()
        norms = np.sqrt(np.diag(co))
        with np.errstate(invalid="ignore", divide="ignore"):
            sim = co / np.outer(norms, norms)
        sim[~np.isfinite(sim)] = 0.0
        np.fill_diagonal(sim, 0.0)
        self.sim_ = _truncate_top_k(sim, self.k)
        self._mat = mat

    def _score_all(self, u_idx: int) -> np.ndarray:
        if u_idx < 0:
            return np.zeros(self.n_items_)
        return (self.sim_[u_idx] @ self._mat).toarray().ravel()
