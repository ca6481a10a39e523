"""Matrix-factorization rating models trained by SGD or multiplicative
updates.

The per-sample SGD loops run through :mod:`wattrec.kernels` (compiled when
available).  Training is single-threaded and the per-epoch shuffle comes
from one seeded generator, so a fixed seed gives bit-identical parameters
on one platform.
"""

from __future__ import annotations

import numpy as np

from wattrec import kernels
from wattrec.data import Dataset
from wattrec.errors import DataError
from wattrec.models.base import RatingPredictor, csr_by_user, user_item_codes


class SVD(RatingPredictor):
    """Biased matrix factorization: clamp(mu + b_u + b_i + p_u . q_i)."""

    name = "svd"

    def __init__(self, n_factors: int = 100, n_epochs: int = 20, lr: float = 0.005,
                 reg: float = 0.02, init_std: float = 0.1, seed: int = 0):
        self.n_factors = n_factors
        self.n_epochs = n_epochs
        self.lr = lr
        self.reg = reg
        self.init_std = init_std
        self.seed = seed

    def _init_params(self, rng, n_users, n_items):
        self.bu_ = np.zeros(n_users)
        self.bi_ = np.zeros(n_items)
        self.p_ = rng.normal(0.0, self.init_std, (n_users, self.n_factors))
        self.q_ = rng.normal(0.0, self.init_std, (n_items, self.n_factors))

    def fit(self, train: Dataset):
        self._begin_fit(train)
        frame = train.frame
        users, items, u_codes, i_codes = user_item_codes(frame)
        r = frame["rating"].to_numpy(dtype=np.float64)
        self.user_index_, self.item_index_ = users, items
        self.mu_ = float(r.mean())

        rng = np.random.default_rng(self.seed)
        self._init_params(rng, len(users), len(items))
        for _ in range(self.n_epochs):
            order = rng.permutation(len(r)).astype(np.int32)
            kernels.svd_epoch(u_codes, i_codes, r, order, self.mu_,
                              self.bu_, self.bi_, self.p_, self.q_, self.lr, self.reg)
        self._user_vecs = self.p_
        return self

    def _predict_idx(self, u: int, i: int) -> float:
        est = self.mu_
        if u >= 0:
            est += self.bu_[u]
        if i >= 0:
            est += self.bi_[i]
        if u >= 0 and i >= 0:
            est += float(np.dot(self._user_vecs[u], self.q_[i]))
        return est

    def predict(self, user, item) -> float:
        self._check_fitted()
        u = self.user_index_.get_indexer([user])[0]
        i = self.item_index_.get_indexer([item])[0]
        return float(self._clamp(self._predict_idx(u, i)))

    def predict_many(self, users, items) -> np.ndarray:
        self._check_fitted()
        u_idx = self.user_index_.get_indexer(list(users))
        i_idx = self.item_index_.get_indexer(list(items))
        est = np.full(len(u_idx), self.mu_)
        ku = u_idx >= 0
        ki = i_idx >= 0
        est[ku] += self.bu_[u_idx[ku]]
        est[ki] += self.bi_[i_idx[ki]]
        both = ku & ki
        est[both] += np.einsum(
            "ij,ij->i", self._user_vecs[u_idx[both]], self.q_[i_idx[both]]
        )
        return self._clamp(est)


class SVDpp(SVD):
    """SVD extended with implicit item factors.

    The user vector becomes p_u + |N(u)|^(-1/2) * sum of y_j over the items
    N(u) the user rated.  With ``use_implicit_factors=False`` the y terms
    are pinned at zero and the model reproduces plain SVD exactly.
    """

    name = "svdpp"

    def __init__(self, n_factors: int = 100, n_epochs: int = 20, lr: float = 0.005,
                 reg: float = 0.02, init_std: float = 0.1, seed: int = 0,
                 use_implicit_factors: bool = True):
        super().__init__(n_factors, n_epochs, lr, reg, init_std, seed)
        self.use_implicit_factors = use_implicit_factors

    def fit(self, train: Dataset):
        self._begin_fit(train)
        frame = train.frame
        users, items, u_codes, i_codes = user_item_codes(frame)
        r = frame["rating"].to_numpy(dtype=np.float64)
        self.user_index_, self.item_index_ = users, items
        self.mu_ = float(r.mean())
        n_users, n_items = len(users), len(items)

        rng = np.random.default_rng(self.seed)
        self._init_params(rng, n_users, n_items)
        indptr, rated_items, _ = csr_by_user(u_codes, i_codes, n_users)

        if self.use_implicit_factors:
            self.y_ = rng.normal(0.0, self.init_std, (n_items, self.n_factors))
            for _ in range(self.n_epochs):
                order = rng.permutation(len(r)).astype(np.int32)
                kernels.svdpp_epoch(u_codes, i_codes, r, order, self.mu_,
                                    self.bu_, self.bi_, self.p_, self.q_, self.y_,
                                    indptr, rated_items, self.lr, self.reg)
        else:
            self.y_ = np.zeros((n_items, self.n_factors))
            for _ in range(self.n_epochs):
                order = rng.permutation(len(r)).astype(np.int32)
                kernels.svd_epoch(u_codes, i_codes, r, order, self.mu_,
                                  self.bu_, self.bi_, self.p_, self.q_, self.lr, self.reg)

        # effective user vectors: p_u plus the aggregated implicit profile
        counts = np.diff(indptr).astype(np.float64)
        impl = np.zeros_like(self.p_)
        np.add.at(impl, np.repeat(np.arange(n_users), np.diff(indptr)), self.y_[rated_items])
        self._user_vecs = self.p_ + impl / np.sqrt(np.maximum(counts, 1.0))[:, None]
        return self


class NMF(RatingPredictor):
    """Non-negative matrix factorization with multiplicative batch updates.

    Factors stay non-negative after every epoch; prediction is the plain
    clamped dot product (no bias terms).
    """

    name = "nmf"

    def __init__(self, n_factors: int = 15, n_epochs: int = 50,
                 reg_pu: float = 0.06, reg_qi: float = 0.06,
                 init_low: float = 0.0, init_high: float = 1.0, seed: int = 0):
        self.n_factors = n_factors
        self.n_epochs = n_epochs
        self.reg_pu = reg_pu
        self.reg_qi = reg_qi
        self.init_low = init_low
        self.init_high = init_high
        self.seed = seed

    def fit(self, train: Dataset):
        self._begin_fit(train)
        frame = train.frame
        if float(frame["rating"].min()) < 0:
            raise DataError(f"{self.name}: training ratings must be non-negative")
        users, items, u_codes, i_codes = user_item_codes(frame)
        r = frame["rating"].to_numpy(dtype=np.float64)
        n_users, n_items = len(users), len(items)

        rng = np.random.default_rng(self.seed)
        p = rng.uniform(self.init_low, self.init_high, (n_users, self.n_factors))
        q = rng.uniform(self.init_low, self.init_high, (n_items, self.n_factors))
        cnt_u = np.bincount(u_codes, minlength=n_users).astype(np.float64)
        cnt_i = np.bincount(i_codes, minlength=n_items).astype(np.float64)

        for _ in range(self.n_epochs):
            est = np.einsum("ij,ij->i", p[u_codes], q[i_codes])
            user_num = np.zeros_like(p)
            user_den = np.zeros_like(p)
            item_num = np.zeros_like(q)
            item_den = np.zeros_like(q)
            np.add.at(user_num, u_codes, q[i_codes] * r[:, None])
            np.add.at(user_den, u_codes, q[i_codes] * est[:, None])
            np.add.at(item_num, i_codes, p[u_codes] * r[:, None])
            np.add.at(item_den, i_codes, p[u_codes] * est[:, None])
            p = p * user_num / np.maximum(user_den + cnt_u[:, None] * self.reg_pu * p, 1e-32)
            q = q * item_num / np.maximum(item_den + cnt_i[:, None] * self.reg_qi * q, 1e-32)

        self.p_, self.q_ = p, q
        self.mu_ = float(r.mean())
        self.user_index_, self.item_index_ = users, items
        return self

    def _predict_idx(self, u: int, i: int) -> float:
        if u < 0 or i < 0:
            return self.mu_
        return float(np.dot(self.p_[u], self.q_[i]))

    def predict(self, user, item) -> float:
        self._check_fitted()
        u = self.user_index_.get_indexer([user])[0]
        i = self.item_index_.get_indexer([item])[0]
        return float(self._clamp(self._predict_idx(u, i)))

    def predict_many(self, users, items) -> np.ndarray:
        self._check_fitted()
        u_idx = self.user_index_.get_indexer(list(users))
        i_idx = self.item_index_.get_indexer(list(items))
        est = np.full(len(u_idx), self.mu_)
        both = (u_idx >= 0) & (i_idx >= 0)
        est[both] = np.einsum("ij,ij->i", self.p_[u_idx[both]], self.q_[i_idx[both]])
        return self._clamp(est)
