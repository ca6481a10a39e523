"""Model name registry used by the experiment configuration and CLI."""

from __future__ import annotations

from typing import Optional

from wattrec.errors import ConfigError
from wattrec.models import factor, ranking, rating
from wattrec.models.ensembles import RankingEnsemble, RatingEnsemble

RATING_MODELS = {
    "global_mean": rating.GlobalMean,
    "random": rating.RandomPredictor,
    "bias_baseline": rating.BiasBaseline,
    "svd": factor.SVD,
    "svdpp": factor.SVDpp,
    "nmf": factor.NMF,
    "knn_baseline": rating.KNNBaseline,
    "slope_one": rating.SlopeOne,
    "co_clustering": rating.CoClustering,
}

RANKING_MODELS = {
    "random": ranking.RandomScorer,
    "popular": ranking.PopularScorer,
    "user_mean": ranking.UserMeanScorer,
    "als": ranking.ALSImplicit,
    "bpr": ranking.BPR,
    "logistic_mf": ranking.LogisticMF,
    "item_knn": ranking.ItemKNN,
    "user_knn": ranking.UserKNN,
}

RATING_ENSEMBLES = {
    "average_ensemble": ("average", ["svd", "svdpp", "nmf", "knn_baseline"]),
    "weighted_ensemble": ("weighted", ["svd", "svdpp", "nmf", "knn_baseline"]),
    "stacking_ensemble": ("stacking", ["svd", "svdpp", "nmf", "knn_baseline"]),
    "top_performers": ("average", ["svd", "svdpp"]),
}

RANKING_ENSEMBLES = {
    "average_ensemble": ("average", ["als", "bpr", "item_knn", "user_knn"]),
    "weighted_ensemble": ("weighted", ["als", "bpr", "item_knn", "user_knn"]),
    "rank_fusion": ("rank_fusion", ["als", "bpr", "item_knn", "user_knn"]),
    "top_performers": ("average", ["als", "item_knn"]),
}

_SEEDED = {"random", "svd", "svdpp", "nmf", "co_clustering", "als", "bpr",
           "logistic_mf", "user_mean"}


def _construct(table, name: str, params: dict, seed: int):
    cls = table[name]
    kwargs = dict(params)
    if name in _SEEDED:
        kwargs.setdefault("seed", seed)
    return cls(**kwargs)


def _split_ensemble_params(params: dict):
    base_names = params.pop("base_models", None)
    base_params = params.pop("base_params", {})
    return base_names, base_params


def create_rating_model(name: str, params: Optional[dict] = None, seed: int = 0):
    params = dict(params or {})
    if name in RATING_MODELS:
        return _construct(RATING_MODELS, name, params, seed)
    if name in RATING_ENSEMBLES:
        strategy, default_bases = RATING_ENSEMBLES[name]
        base_names, base_params = _split_ensemble_params(params)
        bases = [
            create_rating_model(b, base_params.get(b), seed)
            for b in (base_names or default_bases)
        ]
        params.setdefault("seed", seed)
        return RatingEnsemble(bases, strategy=strategy, name=name, **params)
    raise ConfigError(f"unknown rating model {name!r}")


def create_ranking_model(name: str, params: Optional[dict] = None, seed: int = 0):
    params = dict(params or {})
    if name in RANKING_MODELS:
        return _construct(RANKING_MODELS, name, params, seed)
    if name in RANKING_ENSEMBLES:
        strategy, default_bases = RANKING_ENSEMBLES[name]
        base_names, base_params = _split_ensemble_params(params)
        bases = [
            create_ranking_model(b, base_params.get(b), seed)
            for b in (base_names or default_bases)
        ]
        params.setdefault("seed", seed)
        return RankingEnsemble(bases, strategy=strategy, name=name, **params)
    raise ConfigError(f"unknown ranking model {name!r}")


def list_models() -> dict:
    return {
        "rating": sorted(RATING_MODELS) + sorted(RATING_ENSEMBLES),
        "ranking": sorted(RANKING_MODELS) + sorted(RANKING_ENSEMBLES),
    }
