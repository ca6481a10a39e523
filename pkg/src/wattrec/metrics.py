"""Accuracy metrics: RMSE for rating prediction, NDCG / RBP / reciprocal
rank for top-n ranking, plus mean/std aggregation across folds.

Ranking metrics operate on binary relevance lists.  Users whose test set
contains no relevant item contribute a score of 0 and stay in the
averaging denominator (the alternative, dropping them, is selectable in
the evaluation helpers).
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from wattrec.errors import ConfigError, DataError


class PredictionPair(NamedTuple):
    y: float
    y_hat: float


class RankedRelevance(NamedTuple):
    """Binary relevance flags of one user's recommendation list.

    ``total_relevant`` counts relevant items in the user's whole test set,
    which bounds the ideal ranking (it may exceed the hits in the list).
    """

    relevance: Tuple[int, ...]
    total_relevant: int


class MetricSummary(NamedTuple):
    mean: float
    std: float
    values: Tuple[float, ...]


def rmse(pairs: Iterable[Tuple[float, float]]) -> float:
    """Root mean squared error over (actual, predicted) pairs."""
    arr = np.asarray(list(pairs), dtype=np.float64)
    if arr.size == 0:
        raise DataError("rmse of an empty prediction list is undefined")
    diff = arr[:, 0] - arr[:, 1]
    return float(np.sqrt(np.mean(diff * diff)))


def dcg(relevance: Sequence[int], k: int) -> float:
    return sum(rel / math.log2(i + 2) for i, rel in enumerate(relevance[:k]))


def ndcg_at_k(r: RankedRelevance, k: int, ideal_truncated: bool = True) -> float:
    """DCG@k normalized by the ideal ordering of the user's relevant items.

    By default the ideal ranking places min(k, total_relevant) relevant
    items at the top.  With ``ideal_truncated`` false the ideal covers all
    of the user's relevant items, the normalization used by the reference
    ranking framework (it lowers scores for users with more than k
    relevant items).  Users with nothing relevant in the test set score 0.
    """
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    if r.total_relevant == 0:
        return 0.0
    n_ideal = min(k, r.total_relevant) if ideal_truncated else r.total_relevant
    ideal = dcg([1] * n_ideal, n_ideal)
    return dcg(r.relevance, k) / ideal


def rbp(r: RankedRelevance, p: float = 0.8) -> float:
    """Rank-biased precision with persistence p, over the returned list."""
    if not 0 < p < 1:
        raise ConfigError(f"persistence must be in (0, 1), got {p}")
    return (1 - p) * sum(rel * p**i for i, rel in enumerate(r.relevance))


def first_relevant_rank(relevance: Sequence[int]) -> Optional[int]:
    """1-based position of the first relevant item, None when absent."""
    for i, rel in enumerate(relevance):
        if rel:
            return i + 1
    return None


def reciprank(first_ranks: Iterable[Optional[int]]) -> float:
    """Mean reciprocal rank; users with no relevant item retrieved count 0."""
    ranks = list(first_ranks)
    if not ranks:
        raise DataError("reciprank of an empty user set is undefined")
    return float(np.mean([1.0 / r if r else 0.0 for r in ranks]))


def summarize(values: Iterable[float]) -> MetricSummary:
    """Arithmetic mean and population standard deviation."""
    vals = tuple(float(v) for v in values)
    if not vals:
        raise DataError("cannot summarize an empty sequence")
    arr = np.asarray(vals)
    return MetricSummary(float(arr.mean()), float(arr.std()), vals)


def ranking_scores(
    per_user: Iterable[RankedRelevance],
    k: int = 10,
    p: float = 0.8,
    include_zero_relevant: bool = True,
    ideal_truncated: bool = True,
) -> dict:
    """Average NDCG@k, RBP, and reciprocal rank over users.

    With ``include_zero_relevant`` false, users whose test set has no
    relevant item are dropped from every denominator instead of scoring 0.
    """
    users = list(per_user)
    if not include_zero_relevant:
        users = [r for r in users if r.total_relevant > 0]
    if not users:
        raise DataError("no users to evaluate")
    return {
        f"ndcg@{k}": float(np.mean([ndcg_at_k(r, k, ideal_truncated) for r in users])),
        "rbp": float(np.mean([rbp(r, p) for r in users])),
        "reciprank": reciprank(first_relevant_rank(r.relevance) for r in users),
    }
