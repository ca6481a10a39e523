"""Recommendation models for the rating and ranking pipelines."""

from wattrec.models.base import RankingScorer, RatingPredictor
from wattrec.models.registry import (
    RANKING_MODELS,
    RATING_MODELS,
    create_ranking_model,
    create_rating_model,
    list_models,
)

__all__ = [
    "RatingPredictor",
    "RankingScorer",
    "RATING_MODELS",
    "RANKING_MODELS",
    "create_rating_model",
    "create_ranking_model",
    "list_models",
]
