"""Baseline and neighborhood rating predictors.

Covers the three simple baselines (global mean, random, bias baseline)
and the non-factorization optimized models (slope one, item KNN over
baseline-centered ratings, co-clustering).
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from wattrec.data import Dataset
from wattrec.errors import CapacityError, DataError
from wattrec.models.base import RatingPredictor, user_item_codes

log = logging.getLogger(__name__)

DEFAULT_MEMORY_BUDGET = 4 * 1024**3  # bytes; similarity matrices refuse beyond this


class GlobalMean(RatingPredictor):
    """Predicts the training mean for every pair."""

    name = "global_mean"

    def fit(self, train: Dataset):
        self._begin_fit(train)
        self.mu_ = float(train.frame["rating"].mean())
        return self

    def predict(self, user, item) -> float:
        self._check_fitted()
        return float(self._clamp(self.mu_))

    def predict_many(self, users, items) -> np.ndarray:
        self._check_fitted()
        return np.full(len(users), self._clamp(self.mu_))


class RandomPredictor(RatingPredictor):
    """Draws predictions from a normal fitted to the training ratings.

    Samples come from N(mean, std) estimated on the training set and are
    clamped to the rating scale; the stream restarts at ``fit`` so a fixed
    seed reproduces the exact prediction sequence.
    """

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit(self, train: Dataset):
        self._begin_fit(train)
        r = train.frame["rating"].to_numpy()
        self.mu_ = float(r.mean())
        self.sigma_ = float(r.std())
        self._rng = np.random.default_rng(self.seed)
        return self

    def predict(self, user, item) -> float:
        self._check_fitted()
        return float(self._clamp(self._rng.normal(self.mu_, self.sigma_)))

    def predict_many(self, users, items) -> np.ndarray:
        self._check_fitted()
        return self._clamp(self._rng.normal(self.mu_, self.sigma_, size=len(users)))


class BiasBaseline(RatingPredictor):
    """mu + b_u + b_i with alternating regularized least-squares biases."""

    name = "bias_baseline"

    def __init__(self, reg_user: float = 15.0, reg_item: float = 10.0, epochs: int = 10):
        self.reg_user = reg_user
        self.reg_item = reg_item
        self.epochs = epochs

    def fit(self, train: Dataset):
        self._begin_fit(train)
        frame = train.frame
        users, items, u_codes, i_codes = user_item_codes(frame)
        r = frame["rating"].to_numpy(dtype=np.float64)
        n_users, n_items = len(users), len(items)

        mu = r.mean()
        bu = np.zeros(n_users)
        bi = np.zeros(n_items)
        cnt_u = np.bincount(u_codes, minlength=n_users)
        cnt_i = np.bincount(i_codes, minlength=n_items)
        for _ in range(self.epochs):
            bi = np.bincount(i_codes, r - mu - bu[u_codes], n_items) / (self.reg_item + cnt_i)
            bu = np.bincount(u_codes, r - mu - bi[i_codes], n_users) / (self.reg_user + cnt_u)

        self.mu_ = float(mu)
        self.user_index_, self.item_index_ = users, items
        self.bu_, self.bi_ = bu, bi
        return self

    def _bias(self, user, item) -> float:
        u = self.user_index_.get_indexer([user])[0]
        i = self.item_index_.get_indexer([item])[0]
        est = self.mu_
        if u >= 0:
            est += self.bu_[u]
        if i >= 0:
            est += self.bi_[i]
        return est

    def predict(self, user, item) -> float:
        self._check_fitted()
        return float(self._clamp(self._bias(user, item)))

    def predict_many(self, users, items) -> np.ndarray:
        self._check_fitted()
        u = self.user_index_.get_indexer(list(users))
        i = self.item_index_.get_indexer(list(items))
        est = self.mu_ + np.where(u >= 0, self.bu_[u], 0.0) + np.where(i >= 0, self.bi_[i], 0.0)
        return self._clamp(est)


class SlopeOne(RatingPredictor):
    """Average pairwise rating deviations between co-rated items."""

    name = "slope_one"

    def fit(self, train: Dataset):
        self._begin_fit(train)
        frame = train.frame
        users, items, u_codes, i_codes = user_item_codes(frame)
        r = frame["rating"].to_numpy(dtype=np.float64)
        n_users, n_items = len(users), len(items)

        rated = sp.csr_matrix(
            (np.ones(len(r)), (u_codes, i_codes)), shape=(n_users, n_items)
        )
        values = sp.csr_matrix((r, (u_codes, i_codes)), shape=(n_users, n_items))
        cnt = (rated.T @ rated).toarray()
        diff = (values.T @ rated - rated.T @ values).toarray()
        with np.errstate(invalid="ignore", divide="ignore"):
            dev = np.where(cnt > 0, diff / np.maximum(cnt, 1), 0.0)

        self.dev_, self.cnt_ = dev, cnt
        self.user_index_, self.item_index_ = users, items
        self.mu_ = float(r.mean())
        self.user_mean_ = np.bincount(u_codes, r, n_users) / np.bincount(u_codes, minlength=n_users)
        indptr = np.zeros(n_users + 1, dtype=np.int64)
        np.add.at(indptr, u_codes + 1, 1)
        self._indptr = np.cumsum(indptr)
        order = np.lexsort((i_codes, u_codes))
        self._items_by_user = i_codes[order]
        self._r_by_user = r[order]
        return self

    def _predict_idx(self, u: int, i: int) -> float:
        if u < 0:
            return self.mu_
        if i < 0:
            return self.user_mean_[u]
        rated = self._items_by_user[self._indptr[u]:self._indptr[u + 1]]
        r = self._r_by_user[self._indptr[u]:self._indptr[u + 1]]
        usable = (self.cnt_[i, rated] > 0) & (rated != i)
        if not usable.any():
            return self.user_mean_[u]
        return float(np.mean(r[usable] + self.dev_[i, rated[usable]]))

    def predict(self, user, item) -> float:
        self._check_fitted()
        u = self.user_index_.get_indexer([user])[0]
        i = self.item_index_.get_indexer([item])[0]
        return float(self._clamp(self._predict_idx(u, i)))

    def predict_many(self, users, items) -> np.ndarray:
        self._check_fitted()
        u_idx = self.user_index_.get_indexer(list(users))
        i_idx = self.item_index_.get_indexer(list(items))
        return self._clamp(
            np.array([self._predict_idx(u, i) for u, i in zip(u_idx, i_idx)])
        )


def _estimate_similarity_bytes(n: int) -> int:
    # similarity + support matrices, double precision
    return 2 * n * n * 8


class KNNBaseline(RatingPredictor):
    """Item neighborhood model on baseline-centered ratings.

    Similarity is shrunk Pearson over baseline residuals; prediction adds
    the weighted residual of the k most similar co-rated neighbors to the
    bias-baseline estimate.  Refuses to fit when the similarity matrix
    would exceed the memory budget.
    """

    name = "knn_baseline"

    def __init__(
        self,
        k: int = 40,
        shrinkage: float = 100.0,
        min_support: int = 1,
        memory_budget_bytes: int = DEFAULT_MEMORY_BUDGET,
        reg_user: float = 15.0,
        reg_item: float = 10.0,
        bias_epochs: int = 10,
    ):
        self.k = k
        self.shrinkage = shrinkage
        self.min_support = min_support
        self.memory_budget_bytes = memory_budget_bytes
        self.reg_user = reg_user
        self.reg_item = reg_item
        self.bias_epochs = bias_epochs

    def fit(self, train: Dataset):
        self._begin_fit(train)
        frame = train.frame
        users, items, u_codes, i_codes = user_item_codes(frame)
        n_users, n_items = len(users), len(items)

        needed = _estimate_similarity_bytes(n_items)
        if needed > self.memory_budget_bytes:
            raise CapacityError(
                f"{self.name}: item-similarity matrix needs ~{needed / 1024**3:.1f} GiB "
                f"for {n_items} items, budget is {self.memory_budget_bytes / 1024**3:.1f} GiB"
            )

        baseline = BiasBaseline(self.reg_user, self.reg_item, self.bias_epochs).fit(train)
        r = frame["rating"].to_numpy(dtype=np.float64)
        b = baseline.mu_ + baseline.bu_[u_codes] + baseline.bi_[i_codes]
        centered = r - b

        rated = sp.csr_matrix((np.ones(len(r)), (u_codes, i_codes)), shape=(n_users, n_items))
        cvals = sp.csr_matrix((centered, (u_codes, i_codes)), shape=(n_users, n_items))
        sq = cvals.multiply(cvals)

        freq = (rated.T @ rated).toarray()
        prods = (cvals.T @ cvals).toarray()
        sqi = (sq.T @ rated).toarray()  # sum of squared residuals of i over co-raters with j
        sqj = sqi.T
        with np.errstate(invalid="ignore", divide="ignore"):
            sim = prods / np.sqrt(sqi * sqj)
        sim[~np.isfinite(sim)] = 0.0
        shrink = np.maximum(freq - 1, 0) / (np.maximum(freq - 1, 0) + self.shrinkage)
        sim *= shrink
        sim[freq < self.min_support] = 0.0
        np.fill_diagonal(sim, 0.0)

        self.sim_ = sim
        self.baseline_ = baseline
        self.user_index_, self.item_index_ = users, items
        self.mu_ = baseline.mu_
        order = np.lexsort((i_codes, u_codes))
        indptr = np.zeros(n_users + 1, dtype=np.int64)
        np.add.at(indptr, u_codes + 1, 1)
        self._indptr = np.cumsum(indptr)
        self._items_by_user = i_codes[order]
        self._centered_by_user = centered[order]
        return self

    def _predict_idx(self, u: int, i: int) -> float:
        base = self.mu_
        if u >= 0:
            base += self.baseline_.bu_[u]
        if i >= 0:
            base += self.baseline_.bi_[i]
        if u < 0 or i < 0:
            return base
        rated = self._items_by_user[self._indptr[u]:self._indptr[u + 1]]
        resid = self._centered_by_user[self._indptr[u]:self._indptr[u + 1]]
        sims = self.sim_[i, rated]
        if len(sims) > self.k:
            top = np.argpartition(-sims, self.k - 1)[: self.k]
            sims, resid = sims[top], resid[top]
        positive = sims > 0
        denom = sims[positive].sum()
        if denom <= 0:
            return base
        return base + float(np.dot(sims[positive], resid[positive]) / denom)

    def predict(self, user, item) -> float:
        self._check_fitted()
        u = self.user_index_.get_indexer([user])[0]
        i = self.item_index_.get_indexer([item])[0]
        return float(self._clamp(self._predict_idx(u, i)))

    def predict_many(self, users, items) -> np.ndarray:
        self._check_fitted()
        u_idx = self.user_index_.get_indexer(list(users))
        i_idx = self.item_index_.get_indexer(list(items))
        return self._clamp(
            np.array([self._predict_idx(u, i) for u, i in zip(u_idx, i_idx)])
        )


class CoClustering(RatingPredictor):
    """Alternating assignment of users and items to co-clusters."""

    name = "co_clustering"

    def __init__(self, n_user_clusters: int = 3, n_item_clusters: int = 3,
                 epochs: int = 20, seed: int = 0):
        self.n_user_clusters = n_user_clusters
        self.n_item_clusters = n_item_clusters
        self.epochs = epochs
        self.seed = seed

    def _averages(self, u_codes, i_codes, r, cu, ci):
        g, h = self.n_user_clusters, self.n_item_clusters
        pair = cu[u_codes] * h + ci[i_codes]
        sums = np.bincount(pair, r, g * h).reshape(g, h)
        cnts = np.bincount(pair, minlength=g * h).reshape(g, h)
        avg_co = np.where(cnts > 0, sums / np.maximum(cnts, 1), self.mu_)
        su = np.bincount(cu[u_codes], r, g)
        nu = np.bincount(cu[u_codes], minlength=g)
        avg_u = np.where(nu > 0, su / np.maximum(nu, 1), self.mu_)
        si = np.bincount(ci[i_codes], r, h)
        ni = np.bincount(ci[i_codes], minlength=h)
        avg_i = np.where(ni > 0, si / np.maximum(ni, 1), self.mu_)
        return avg_co, avg_u, avg_i

    def fit(self, train: Dataset):
        self._begin_fit(train)
        frame = train.frame
        users, items, u_codes, i_codes = user_item_codes(frame)
        r = frame["rating"].to_numpy(dtype=np.float64)
        n_users, n_items = len(users), len(items)
        g, h = self.n_user_clusters, self.n_item_clusters
        if g > n_users or h > n_items:
            raise DataError(
                f"{self.name}: {g}x{h} clusters exceed {n_users} users / {n_items} items"
            )

        self.mu_ = float(r.mean())
        cnt_u = np.bincount(u_codes, minlength=n_users)
        cnt_i = np.bincount(i_codes, minlength=n_items)
        self.user_mean_ = np.bincount(u_codes, r, n_users) / cnt_u
        self.item_mean_ = np.bincount(i_codes, r, n_items) / cnt_i

        rng = np.random.default_rng(self.seed)
        cu = rng.integers(0, g, n_users)
        ci = rng.integers(0, h, n_items)

        for _ in range(self.epochs):
            avg_co, avg_u, avg_i = self._averages(u_codes, i_codes, r, cu, ci)
            # reassign users against current item clusters
            cost_u = np.empty((n_users, g))
            base_i = self.item_mean_[i_codes] - avg_i[ci[i_codes]]
            for cand in range(g):
                est = avg_co[cand, ci[i_codes]] + (self.user_mean_[u_codes] - avg_u[cand]) + base_i
                cost_u[:, cand] = np.bincount(u_codes, (r - est) ** 2, n_users)
            cu = cost_u.argmin(axis=1)
            # reassign items against updated user clusters
            cost_i = np.empty((n_items, h))
            base_u = self.user_mean_[u_codes] - avg_u[cu[u_codes]]
            for cand in range(h):
                est = avg_co[cu[u_codes], cand] + base_u + (self.item_mean_[i_codes] - avg_i[cand])
                cost_i[:, cand] = np.bincount(i_codes, (r - est) ** 2, n_items)
            ci = cost_i.argmin(axis=1)

        self.avg_co_, self.avg_u_, self.avg_i_ = self._averages(u_codes, i_codes, r, cu, ci)
        self.cu_, self.ci_ = cu, ci
        self.user_index_, self.item_index_ = users, items
        return self

    def _predict_idx(self, u: int, i: int) -> float:
        if u < 0 and i < 0:
            return self.mu_
        if u < 0:
            return float(self.item_mean_[i])
        if i < 0:
            return float(self.user_mean_[u])
        gu, hi = self.cu_[u], self.ci_[i]
        return float(
            self.avg_co_[gu, hi]
            + (self.user_mean_[u] - self.avg_u_[gu])
            + (self.item_mean_[i] - self.avg_i_[hi])
        )

    def predict(self, user, item) -> float:
        self._check_fitted()
        u = self.user_index_.get_indexer([user])[0]
        i = self.item_index_.get_indexer([item])[0]
        return float(self._clamp(self._predict_idx(u, i)))

    def predict_many(self, users, items) -> np.ndarray:
        self._check_fitted()
        u_idx = self.user_index_.get_indexer(list(users))
        i_idx = self.item_index_.get_indexer(list(items))
        return self._clamp(
            np.array([self._predict_idx(u, i) for u, i in zip(u_idx, i_idx)])
        )
