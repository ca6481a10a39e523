"""Model contracts shared by both pipelines.

Rating predictors fit on explicit datasets and answer point predictions
for any (user, item) pair, clamped to the training scale.  Ranking
scorers fit on implicit datasets and produce per-user item scores and
top-n recommendation lists that never include training interactions.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from wattrec.data import Dataset, ImplicitDataset
from wattrec.errors import DataError


def build_index(values: pd.Series) -> pd.Index:
    return pd.Index(np.unique(values.to_numpy()))


def user_item_codes(frame: pd.DataFrame) -> Tuple[pd.Index, pd.Index, np.ndarray, np.ndarray]:
    """Dense integer codes for the frame's users and items."""
    users = build_index(frame["user"])
    items = build_index(frame["item"])
    u_codes = users.get_indexer(frame["user"]).astype(np.int32)
    i_codes = items.get_indexer(frame["item"]).astype(np.int32)
    return users, items, u_codes, i_codes


def csr_by_user(
    u_codes: np.ndarray, i_codes: np.ndarray, n_users: int,
    values: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Group item codes (and optional values) by user, items sorted per user."""
    order = np.lexsort((i_codes, u_codes))
    indptr = np.zeros(n_users + 1, dtype=np.int32)
    np.add.at(indptr, u_codes + 1, 1)
    indptr = np.cumsum(indptr, dtype=np.int32)
    items_sorted = i_codes[order]
    vals_sorted = values[order] if values is not None else None
    return indptr, items_sorted, vals_sorted


class RatingPredictor:
    """Contract for explicit-rating models: fit, then predict anywhere.

    Predictions are defined for unseen users and items through each
    model's fallback rule and are clamped to the training rating scale.
    """

    name = "rating-predictor"

    def fit(self, train: Dataset) -> "RatingPredictor":
        raise NotImplementedError

    def predict(self, user, item) -> float:
        raise NotImplementedError

    def predict_many(self, users: Sequence, items: Sequence) -> np.ndarray:
        return np.array([self.predict(u, i) for u, i in zip(users, items)])

    def _check_fitted(self):
        if getattr(self, "scale_", None) is None:
            raise DataError(f"{self.name}: predict called before fit")

    def _begin_fit(self, train: Dataset):
        if train.n_ratings == 0:
            raise DataError(f"{self.name}: cannot fit on an empty dataset")
        self.scale_ = train.scale

    def _clamp(self, value):
        return np.clip(value, self.scale_.min, self.scale_.max)


class RankingScorer:
    """Contract for implicit-feedback models: score items, recommend top-n.

    ``recommend`` sorts by descending score with ties broken by internal
    item index (stable), and always excludes the user's training items.
    """

    name = "ranking-scorer"

    def fit(self, train: ImplicitDataset) -> "RankingScorer":
        if train.n_positives == 0:
            raise DataError(f"{self.name}: cannot fit on an empty dataset")
        users, items, u_codes, i_codes = user_item_codes(train.frame)
        self.user_index_ = users
        self.item_index_ = items
        self.n_users_ = len(users)
        self.n_items_ = len(items)
        indptr, item_list, _ = csr_by_user(u_codes, i_codes, self.n_users_)
        self.seen_indptr_ = indptr
        self.seen_items_ = item_list
        self._fit(u_codes, i_codes)
        return self

    def _fit(self, u_codes: np.ndarray, i_codes: np.ndarray) -> None:
        raise NotImplementedError

    def _score_all(self, u_idx: int) -> np.ndarray:
        """Scores for every internal item; u_idx is -1 for unseen users."""
        raise NotImplementedError

    def _user_items(self, u_idx: int) -> np.ndarray:
        if u_idx < 0:
            return np.empty(0, dtype=np.int32)
        return self.seen_items_[self.seen_indptr_[u_idx]:self.seen_indptr_[u_idx + 1]]

    def _user_idx(self, user) -> int:
        return int(self.user_index_.get_indexer([user])[0])

    def score(self, user, item) -> float:
        i_idx = self.item_index_.get_indexer([item])[0]
        if i_idx < 0:
            return 0.0
        return float(self._score_all(self._user_idx(user))[i_idx])

    def _candidate_mask(self, u_idx: int, candidates) -> np.ndarray:
        mask = np.zeros(self.n_items_, dtype=bool)
        if candidates is None:
            mask[:] = True
        else:
            idx = self.item_index_.get_indexer(list(candidates))
            mask[idx[idx >= 0]] = True
        mask[self._user_items(u_idx)] = False
        return mask

    def _order_candidates(self, u_idx: int, scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
        cand = np.nonzero(mask)[0]
        return cand[np.argsort(-scores[cand], kind="stable")]

    def recommend(self, user, n: Optional[int] = None, candidates=None) -> list:
        """Top-n (item, score) pairs among candidates, training items excluded."""
        u_idx = self._user_idx(user)
        scores = self._score_all(u_idx)
        mask = self._candidate_mask(u_idx, candidates)
        ranked = self._order_candidates(u_idx, scores, mask)
        if n is not None:
            ranked = ranked[:n]
        return [(self.item_index_[i], float(scores[i])) for i in ranked]
