"""JSON experiment configuration.

One config describes a pipeline (rating or ranking), one or more
datasets, the split and cross-validation protocol, the model list with
hyperparameters, the power meter, and the emission factor.  Everything
has a validated default except the dataset path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

from wattrec.data import ColumnMapping, RatingScale
from wattrec.energy.meters import MeterConfig
from wattrec.errors import ConfigError
from wattrec.models.registry import RANKING_ENSEMBLES, RANKING_MODELS, RATING_ENSEMBLES, RATING_MODELS

PIPELINES = ("rating", "ranking")


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    path: str
    delimiter: str = "\t"
    header: bool = True
    user_column: Union[str, int] = "user"
    item_column: Union[str, int] = "item"
    rating_column: Union[str, int] = "rating"
    timestamp_column: Optional[Union[str, int]] = None
    scale: RatingScale = RatingScale(1, 5)
    implicit_threshold: Optional[float] = None
    min_interactions_per_user: int = 10
    min_test_items_per_user: int = 1

    def mapping(self) -> ColumnMapping:
        return ColumnMapping(
            self.user_column,
            self.item_column,
            self.rating_column,
            self.timestamp_column,
            self.delimiter,
            self.header,
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "DatasetConfig":
        raw = dict(raw)
        if "name" not in raw or "path" not in raw:
            raise ConfigError("dataset config needs 'name' and 'path'")
        scale = raw.pop("scale", [1, 5])
        try:
            scale = RatingScale(float(scale[0]), float(scale[1]))
        except (TypeError, IndexError, ValueError) as exc:
            raise ConfigError(f"invalid rating scale {scale!r}") from exc
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown dataset settings: {sorted(unknown)}")
        return cls(scale=scale, **raw)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BaselineCheck:
    enabled: bool = False
    expected_w: float = 71.2
    tolerance_w: float = 5.0
    duration_s: float = 600.0


@dataclass(frozen=True)
class EvaluationConfig:
    """Ranking-evaluation knobs.

    The ideal-DCG normalization defaults to the reference ranking
    framework's convention (ideal over all relevant items); set
    ``ndcg_ideal_truncated`` to normalize by the top-k ideal instead.
    """

    k: int = 10
    rbp_persistence: float = 0.8
    include_zero_relevant: bool = True
    ndcg_ideal_truncated: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: str
    datasets: List[DatasetConfig]
    models: List[ModelSpec]
    seed: int = 0
    train_fraction: float = 0.8
    split_seed: int = 0
    cv_enabled: bool = False
    cv_k: int = 5
    meter: Optional[MeterConfig] = None
    emission_factor: float = 420.0
    baseline_check: BaselineCheck = BaselineCheck()
    evaluation: EvaluationConfig = EvaluationConfig()
    data_dir: str = "data"
    output_dir: str = "results"
    measurements_dir: str = "measurements"

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")
        if not self.datasets:
            raise ConfigError("config lists no datasets")
        if not self.models:
            raise ConfigError("config lists no models")
        table = (
            set(RATING_MODELS) | set(RATING_ENSEMBLES)
            if self.pipeline == "rating"
            else set(RANKING_MODELS) | set(RANKING_ENSEMBLES)
        )
        for spec in self.models:
            if spec.name not in table:
                raise ConfigError(
                    f"unknown {self.pipeline} model {spec.name!r} "
                    f"(known: {sorted(table)})"
                )

    def split_dir(self, dataset: DatasetConfig) -> Path:
        suffix = "split" if self.pipeline == "rating" else "peruser-split"
        return Path(self.data_dir) / f"{dataset.name}-{suffix}"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        if "datasets" in raw:
            ds = [DatasetConfig.from_dict(d) for d in raw.pop("datasets")]
        elif "dataset" in raw:
            ds = [DatasetConfig.from_dict(raw.pop("dataset"))]
        else:
            raise ConfigError("config needs a 'dataset' or 'datasets' entry")

        models = []
        for m in raw.pop("models", []):
            if isinstance(m, str):
                models.append(ModelSpec(m))
            else:
                models.append(ModelSpec(m["name"], m.get("params", {})))

        split = raw.pop("split", {})
        meter_raw = raw.pop("meter", None)
        meter = MeterConfig.from_dict(meter_raw) if meter_raw else None
        baseline = BaselineCheck(**raw.pop("baseline_check", {}))
        evaluation = EvaluationConfig(**raw.pop("evaluation", {}))
        cv = raw.pop("cv", {})

        kwargs = {
            "pipeline": raw.pop("pipeline", "rating"),
            "datasets": ds,
            "models": models,
            "seed": raw.pop("seed", 0),
            "train_fraction": split.get("train_fraction", 0.8),
            "split_seed": split.get("seed", 0),
            "cv_enabled": cv.get("enabled", False),
            "cv_k": cv.get("k", 5),
            "meter": meter,
            "emission_factor": raw.pop("emission_factor_g_per_kwh", 420.0),
            "baseline_check": baseline,
            "evaluation": evaluation,
            "data_dir": raw.pop("data_dir", "data"),
            "output_dir": raw.pop("output_dir", "results"),
            "measurements_dir": raw.pop("measurements_dir", "measurements"),
        }
        if raw:
            raise ConfigError(f"unknown config entries: {sorted(raw)}")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(raw)
