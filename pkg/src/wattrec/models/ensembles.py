"""Ensemble strategies for both pipelines.

Rating ensembles combine point predictions by averaging, learned convex
weights (non-negative least squares on an internal holdout), or a linear
stacking meta-learner.  Ranking ensembles combine per-user candidate
scores after min-max normalization, or fuse ranks reciprocally.  A
failing base model fails the whole ensemble; reduced ensembles must be
configured explicitly.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from wattrec.data import Dataset, ImplicitDataset
from wattrec.errors import ConfigError
from wattrec.metrics import RankedRelevance, ndcg_at_k
from wattrec.models.base import RankingScorer, RatingPredictor
from wattrec.splitting import SplitConfig, global_random_split, per_user_split

log = logging.getLogger(__name__)

RATING_STRATEGIES = ("average", "weighted", "stacking")
RANKING_STRATEGIES = ("average", "weighted", "rank_fusion")


def _validate_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != n:
        raise ConfigError(f"expected {n} weights, got {len(w)}")
    if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
        raise ConfigError("ensemble weights must be non-negative and sum to 1")
    return w


class RatingEnsemble(RatingPredictor):
    """Combines fitted rating predictors into one predictor."""

    def __init__(
        self,
        bases: Sequence[RatingPredictor],
        strategy: str = "average",
        weights: Optional[Sequence[float]] = None,
        holdout_fraction: float = 0.25,
        seed: int = 0,
        name: Optional[str] = None,
    ):
        if not bases:
            raise ConfigError("ensemble needs at least one base model")
        if strategy not in RATING_STRATEGIES:
            raise ConfigError(f"unknown rating ensemble strategy {strategy!r}")
        self.bases = list(bases)
        self.strategy = strategy
        self.holdout_fraction = holdout_fraction
        self.seed = seed
        self.name = name or f"{strategy}_ensemble"
        self.weights_ = (
            _validate_weights(weights, len(bases)) if weights is not None else None
        )
        self._fixed_weights = weights is not None
        self.intercept_ = 0.0

    def _holdout_predictions(self, train: Dataset):
        cfg = SplitConfig("global", 1.0 - self.holdout_fraction, self.seed)
        inner = global_random_split(train, cfg)
        for base in self.bases:
            base.fit(inner.train)
        held = inner.test.frame
        preds = np.column_stack(
            [b.predict_many(held["user"], held["item"]) for b in self.bases]
        )
        return preds, held["rating"].to_numpy(dtype=np.float64)

    def fit(self, train: Dataset):
        self._begin_fit(train)
        if self.strategy == "weighted" and not self._fixed_weights:
            preds, actual = self._holdout_predictions(train)
            w, _ = nnls(preds, actual)
            if w.sum() <= 0:
                log.warning("%s: degenerate weights, falling back to uniform", self.name)
                w = np.ones(len(self.bases))
            self.weights_ = w / w.sum()
        elif self.strategy == "stacking":
            preds, actual = self._holdout_predictions(train)
            a = np.column_stack([np.ones(len(actual)), preds])
            if np.linalg.matrix_rank(a) < a.shape[1]:
                log.warning(
                    "%s: singular meta-learner system, falling back to uniform averaging",
                    self.name,
                )
                self.intercept_ = 0.0
                self.weights_ = np.full(len(self.bases), 1.0 / len(self.bases))
            else:
                coef, *_ = np.linalg.lstsq(a, actual, rcond=None)
                self.intercept_ = float(coef[0])
                self.weights_ = coef[1:]
        for base in self.bases:
            base.fit(train)
        return self

    def _combine(self, preds: np.ndarray) -> np.ndarray:
        if self.strategy == "average" or self.weights_ is None:
            est = preds.mean(axis=-1)
        else:
            est = self.intercept_ + preds @ self.weights_
        return self._clamp(est)

    def predict(self, user, item) -> float:
        self._check_fitted()
        preds = np.array([b.predict(user, item) for b in self.bases])
        return float(self._combine(preds[None, :])[0])

    def predict_many(self, users, items) -> np.ndarray:
        self._check_fitted()
        preds = np.column_stack([b.predict_many(users, items) for b in self.bases])
        return self._combine(preds)


def minmax_normalize(scores: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; constant inputs map to 0.5."""
    lo, hi = scores.min(), scores.max()
    if hi - lo <= 0:
        return np.full_like(scores, 0.5)
    return (scores - lo) / (hi - lo)


class RankingEnsemble(RankingScorer):
    """Combines ranking scorers by normalized score averaging or rank fusion."""

    def __init__(
        self,
        bases: Sequence[RankingScorer],
        strategy: str = "average",
        weights: Optional[Sequence[float]] = None,
        rrf_c: float = 60.0,
        holdout_fraction: float = 0.25,
        eval_k: int = 10,
        seed: int = 0,
        name: Optional[str] = None,
    ):
        if not bases:
            raise ConfigError("ensemble needs at least one base model")
        if strategy not in RANKING_STRATEGIES:
            raise ConfigError(f"unknown ranking ensemble strategy {strategy!r}")
        self.bases = list(bases)
        self.strategy = strategy
        self.rrf_c = rrf_c
        self.holdout_fraction = holdout_fraction
        self.eval_k = eval_k
        self.seed = seed
        self.name = name or f"{strategy}_ensemble"
        self.weights_ = (
            _validate_weights(weights, len(bases)) if weights is not None else None
        )
        self._fixed_weights = weights is not None

    def _validation_ndcg(self, train: ImplicitDataset) -> np.ndarray:
        cfg = SplitConfig(
            "per-user",
            train_fraction=1.0 - self.holdout_fraction,
            seed=self.seed,
            min_interactions_per_user=2,
            min_test_items_per_user=1,
        )
        inner = per_user_split(train, cfg)
        for base in self.bases:
            base.fit(inner.train)
        held = inner.test.frame.groupby("user")["item"].agg(set)
        scores = np.zeros(len(self.bases))
        for b, base in enumerate(self.bases):
            vals = []
            for user, relevant in held.items():
                recs = base.recommend(user, n=self.eval_k)
                rel = tuple(int(item in relevant) for item, _ in recs)
                vals.append(ndcg_at_k(RankedRelevance(rel, len(relevant)), self.eval_k))
            scores[b] = float(np.mean(vals)) if vals else 0.0
        return scores

    def fit(self, train: ImplicitDataset):
        if self.strategy == "weighted" and not self._fixed_weights:
            ndcg = self._validation_ndcg(train)
            if ndcg.sum() <= 0:
                log.warning("%s: all-zero validation NDCG, using uniform weights", self.name)
                ndcg = np.ones(len(self.bases))
            self.weights_ = ndcg / ndcg.sum()
        self._full_train = train
        return super().fit(train)

    def _fit(self, u_codes, i_codes):
        for base in self.bases:
            base.fit(self._full_train)

    def _combine(self, u_idx: int, mask: np.ndarray) -> np.ndarray:
        cand = np.nonzero(mask)[0]
        combined = np.full(self.n_items_, -np.inf)
        combined[cand] = 0.0
        weights = (
            self.weights_ if self.weights_ is not None
            else np.full(len(self.bases), 1.0 / len(self.bases))
        )
        for w, base in zip(weights, self.bases):
            scores = base._score_all(u_idx)[cand]
            if self.strategy == "rank_fusion":
                order = np.argsort(-scores, kind="stable")
                ranks = np.empty(len(cand))
                ranks[order] = np.arange(1, len(cand) + 1)
                combined[cand] += 1.0 / (self.rrf_c + ranks)
            else:
                combined[cand] += w * minmax_normalize(scores)
        return combined

    def _score_all(self, u_idx: int) -> np.ndarray:
        mask = np.zeros(self.n_items_, dtype=bool)
        mask[:] = True
        mask[self._user_items(u_idx)] = False
        return self._combine(u_idx, mask)

    def recommend(self, user, n: Optional[int] = None, candidates=None) -> list:
        u_idx = self._user_idx(user)
        mask = self._candidate_mask(u_idx, candidates)
        scores = self._combine(u_idx, mask)
        ranked = self._order_candidates(u_idx, scores, mask)
        if n is not None:
            ranked = ranked[:n]
        return [(self.item_index_[i], float(scores[i])) for i in ranked]
