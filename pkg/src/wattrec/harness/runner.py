"""Experiment execution protocol.

Each run follows the same sequence: resolve the cached split (creating it
on first use), start a metering session, run cross-validation and
training and evaluation inside it, stop the session, convert energy to
carbon, and persist the record.  Suites execute strictly sequentially so
energy attribution stays per-model, append results after every run, and
skip already-recorded runs on restart.
"""

from __future__ import annotations

import json
import logging
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from wattrec.data import (
    Dataset,
    ImplicitDataset,
    clean,
    compute_stats,
    convert_implicit,
    load_interactions,
    save_dataset,
    save_stats,
)
from wattrec.energy.carbon import CarbonReport, carbon
from wattrec.energy.meters import MeterConfig
from wattrec.energy.session import (
    EnergyResult,
    MeasurementSession,
    check_baseline,
    measure_idle_baseline,
)
from wattrec.errors import (
    CapacityError,
    MeterBusyError,
    SplitCacheError,
    UndefinedEnergyError,
    WattrecError,
)
from wattrec.harness.config import DatasetConfig, EvaluationConfig, ExperimentConfig, ModelSpec
from wattrec.metrics import (
    MetricSummary,
    RankedRelevance,
    ranking_scores,
    rmse,
    summarize,
)
from wattrec.models.registry import create_ranking_model, create_rating_model
from wattrec.splitting import (
    SplitConfig,
    TrainTestSplit,
    cache_split,
    has_cached_split,
    kfold_global,
    kfold_per_user,
    load_split,
    split as make_split,
)

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "model", "dataset", "pipeline", "metric_name", "metric_value",
    "cv_mean", "cv_std", "energy_wh", "carbon_g", "fit_s", "predict_s", "status",
)
RANKING_K = 10
RBP_PERSISTENCE = 0.8
PLAUSIBILITY_FACTOR = 5.0


@dataclass
class ExperimentRecord:
    model: str
    dataset: str
    pipeline: str
    status: str = "ok"
    metrics: Dict[str, float] = field(default_factory=dict)
    cv: Dict[str, MetricSummary] = field(default_factory=dict)
    energy: Optional[EnergyResult] = None
    carbon: Optional[CarbonReport] = None
    fit_seconds: float = 0.0
    predict_seconds: float = 0.0
    cv_seconds: float = 0.0
    weights: Optional[List[float]] = None
    plausibility_flag: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> dict:
        out = {
            "model": self.model,
            "dataset": self.dataset,
            "pipeline": self.pipeline,
            "status": self.status,
            "metrics": self.metrics,
            "cv": {k: {"mean": v.mean, "std": v.std, "values": list(v.values)}
                   for k, v in self.cv.items()},
            "fit_seconds": self.fit_seconds,
            "predict_seconds": self.predict_seconds,
            "cv_seconds": self.cv_seconds,
            "plausibility_flag": self.plausibility_flag,
        }
        if self.energy:
            out["energy"] = self.energy.__dict__
        if self.carbon:
            out["carbon"] = self.carbon.__dict__
        if self.weights is not None:
            out["weights"] = list(self.weights)
        return out


def load_clean_dataset(ds_cfg: DatasetConfig) -> Dataset:
    raw = load_interactions(ds_cfg.path, ds_cfg.mapping(), ds_cfg.scale, ds_cfg.name)
    return clean(raw)


def prepare_split(cfg: ExperimentConfig, ds_cfg: DatasetConfig,
                  force: bool = False) -> TrainTestSplit:
    """Return the pipeline's split, from cache when present.

    Both pipelines split the cleaned explicit ratings; the ranking
    pipeline thresholds the training half into implicit feedback at fit
    time and treats test rows at or above the threshold as relevant.
    """
    directory = cfg.split_dir(ds_cfg)
    if has_cached_split(directory) and not force:
        log.info("%s: loading cached split from %s", ds_cfg.name, directory)
        return load_split(directory)

    dataset = load_clean_dataset(ds_cfg)
    if cfg.pipeline == "rating":
        split_cfg = SplitConfig("global", cfg.train_fraction, cfg.split_seed)
    else:
        split_cfg = SplitConfig(
            "per-user",
            cfg.train_fraction,
            cfg.split_seed,
            ds_cfg.min_interactions_per_user,
            ds_cfg.min_test_items_per_user,
        )
    result = make_split(dataset, split_cfg)
    cache_split(result, directory)
    log.info("%s: cached split at %s (checksum %s)",
             ds_cfg.name, directory, result.checksum[:12])
    return result


def prepare_dataset(cfg: ExperimentConfig, ds_cfg: DatasetConfig,
                    force: bool = False) -> TrainTestSplit:
    """Clean + cache the dataset and its split (the ``prepare`` command)."""
    dataset = load_clean_dataset(ds_cfg)
    data_dir = Path(cfg.data_dir)
    save_dataset(dataset, data_dir / f"{ds_cfg.name}-clean.tsv")
    stats = save_stats(dataset, data_dir / f"{ds_cfg.name}-stats.json")
    log.info("%s: %d users, %d items, %d ratings, sparsity %.4f",
             ds_cfg.name, *stats)
    return prepare_split(cfg, ds_cfg, force=force)


def _build_model(cfg: ExperimentConfig, spec: ModelSpec):
    if cfg.pipeline == "rating":
        return create_rating_model(spec.name, spec.params, cfg.seed)
    return create_ranking_model(spec.name, spec.params, cfg.seed)


def evaluate_rating(model, test: Dataset) -> Dict[str, float]:
    frame = test.frame
    preds = model.predict_many(frame["user"], frame["item"])
    actual = frame["rating"].to_numpy(dtype=np.float64)
    return {"rmse": rmse(zip(actual, preds))}


def evaluate_ranking(model, test: Dataset, threshold: float,
                     ev: Optional[EvaluationConfig] = None) -> Dict[str, float]:
    """Top-k metrics over every test user.

    Relevant items are the user's test rows at or above the implicit
    threshold; users whose test rows all fall below it score zero and
    stay in the average.
    """
    ev = ev or EvaluationConfig()
    frame = test.frame
    positives = frame[frame["rating"] >= threshold]
    relevant_by_user = positives.groupby("user")["item"].agg(set)
    per_user = []
    for user in frame["user"].unique():
        relevant = relevant_by_user.get(user, set())
        recs = model.recommend(user, n=ev.k)
        rel = tuple(int(item in relevant) for item, _ in recs)
        per_user.append(RankedRelevance(rel, len(relevant)))
    return ranking_scores(per_user, k=ev.k, p=ev.rbp_persistence,
                          include_zero_relevant=ev.include_zero_relevant,
                          ideal_truncated=ev.ndcg_ideal_truncated)


def _cross_validate(cfg: ExperimentConfig, spec: ModelSpec,
                    train, threshold: Optional[float] = None) -> Dict[str, MetricSummary]:
    per_metric: Dict[str, List[float]] = {}
    if cfg.pipeline == "rating":
        folds = kfold_global(train, cfg.cv_k, cfg.split_seed)
    else:
        folds = kfold_per_user(train, cfg.cv_k, cfg.split_seed)
    for fold_train, fold_val in folds.folds:
        model = _build_model(cfg, spec).fit(fold_train)
        if cfg.pipeline == "rating":
            scores = evaluate_rating(model, fold_val)
        else:
            scores = _evaluate_ranking_implicit(model, fold_val, cfg.evaluation)
        for name, value in scores.items():
            per_metric.setdefault(name, []).append(value)
    return {name: summarize(values) for name, values in per_metric.items()}


def _evaluate_ranking_implicit(model, val: ImplicitDataset,
                               ev: Optional[EvaluationConfig] = None) -> Dict[str, float]:
    """CV fold evaluation: every held-out positive is relevant."""
    ev = ev or EvaluationConfig()
    relevant_by_user = val.frame.groupby("user")["item"].agg(set)
    per_user = []
    for user, relevant in relevant_by_user.items():
        recs = model.recommend(user, n=ev.k)
        rel = tuple(int(item in relevant) for item, _ in recs)
        per_user.append(RankedRelevance(rel, len(relevant)))
    return ranking_scores(per_user, k=ev.k, p=ev.rbp_persistence,
                          include_zero_relevant=ev.include_zero_relevant,
                          ideal_truncated=ev.ndcg_ideal_truncated)


def run_experiment(
    cfg: ExperimentConfig,
    ds_cfg: DatasetConfig,
    spec: ModelSpec,
    split: TrainTestSplit,
    clock=None,
    prior_energies: Optional[List[float]] = None,
) -> ExperimentRecord:
    record = ExperimentRecord(spec.name, ds_cfg.name, cfg.pipeline)

    session: Optional[MeasurementSession] = None
    if cfg.meter is not None:
        try:
            session = MeasurementSession(
                spec.name, ds_cfg.name, cfg.meter, cfg.measurements_dir, clock
            ).start()
        except (MeterBusyError, OSError) as exc:
            log.warning("meter session unavailable, running unmetered: %s", exc)

    try:
        if cfg.pipeline == "rating":
            train, threshold = split.train, None
        else:
            threshold = ds_cfg.implicit_threshold
            if threshold is None:
                threshold = split.train.scale.default_implicit_threshold()
            train = convert_implicit(split.train, threshold)

        if cfg.cv_enabled:
            t0 = time.perf_counter()
            record.cv = _cross_validate(cfg, spec, train, threshold)
            record.cv_seconds = time.perf_counter() - t0

        model = _build_model(cfg, spec)
        t0 = time.perf_counter()
        model.fit(train)
        record.fit_seconds = time.perf_counter() - t0

        t0 = time.perf_counter()
        if cfg.pipeline == "rating":
            record.metrics = evaluate_rating(model, split.test)
        else:
            record.metrics = evaluate_ranking(model, split.test, threshold, cfg.evaluation)
        record.predict_seconds = time.perf_counter() - t0

        weights = getattr(model, "weights_", None)
        if weights is not None:
            record.weights = [float(w) for w in weights]
    except CapacityError as exc:
        log.error("%s failed: %s", spec.name, exc)
        record.status = "failed(capacity)"
        record.metrics = {}
    except WattrecError as exc:
        log.error("%s failed: %s", spec.name, exc)
        record.status = f"failed({type(exc).__name__})"
        record.metrics = {}
    finally:
        if session is not None:
            try:
                record.energy = session.stop()
            except UndefinedEnergyError as exc:
                log.warning("energy unavailable for %s: %s", spec.name, exc)

    if record.energy is not None:
        record.carbon = carbon(record.energy, cfg.emission_factor)
        if prior_energies:
            med = statistics.median(prior_energies)
            e = record.energy.e_experiment_wh
            if med > 0 and (e > PLAUSIBILITY_FACTOR * med or e < med / PLAUSIBILITY_FACTOR):
                record.plausibility_flag = True
                log.warning(
                    "suspicious energy for %s on %s: %.6f Wh vs median %.6f Wh",
                    spec.name, ds_cfg.name, e, med,
                )
    return record


def _format_rows(record: ExperimentRecord) -> List[List[str]]:
    energy = f"{record.energy.e_experiment_wh:.9f}" if record.energy else ""
    grams = f"{record.carbon.grams_co2e:.9f}" if record.carbon else ""
    base = {
        "model": record.model,
        "dataset": record.dataset,
        "pipeline": record.pipeline,
        "energy_wh": energy,
        "carbon_g": grams,
        "fit_s": f"{record.fit_seconds:.6f}",
        "predict_s": f"{record.predict_seconds:.6f}",
        "status": record.status,
    }
    rows = []
    if record.metrics:
        for name, value in record.metrics.items():
            cv = record.cv.get(name)
            rows.append([
                base["model"], base["dataset"], base["pipeline"],
                name, f"{value:.6f}",
                f"{cv.mean:.6f}" if cv else "",
                f"{cv.std:.6f}" if cv else "",
                base["energy_wh"], base["carbon_g"],
                base["fit_s"], base["predict_s"], base["status"],
            ])
    else:
        rows.append([
            base["model"], base["dataset"], base["pipeline"],
            "", "", "", "",
            base["energy_wh"], base["carbon_g"],
            base["fit_s"], base["predict_s"], base["status"],
        ])
    return rows


def _completed_runs(results_path: Path) -> set:
    done = set()
    if results_path.exists():
        with open(results_path) as fh:
            header = fh.readline()
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                if len(parts) >= 3:
                    done.add((parts[0], parts[1], parts[2]))
    return done


def _prior_energies(results_path: Path) -> Dict[Tuple[str, str], List[float]]:
    priors: Dict[Tuple[str, str], List[float]] = {}
    if results_path.exists():
        with open(results_path) as fh:
            fh.readline()
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                if len(parts) >= 8 and parts[7]:
                    priors.setdefault((parts[0], parts[1]), []).append(float(parts[7]))
    return priors


def run_suite(cfg: ExperimentConfig, clock=None, force_resplit: bool = False,
              only_models: Optional[List[str]] = None,
              only_dataset: Optional[str] = None) -> List[ExperimentRecord]:
    """Run every configured (model, dataset) pair sequentially."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_dir = out_dir / "records"
    records_dir.mkdir(exist_ok=True)
    results_path = out_dir / "results.tsv"

    if not results_path.exists():
        results_path.write_text("\t".join(RESULT_COLUMNS) + "\n")
    done = _completed_runs(results_path)
    priors = _prior_energies(results_path)

    if cfg.meter is not None and cfg.baseline_check.enabled:
        idle = measure_idle_baseline(
            cfg.meter, cfg.baseline_check.duration_s, cfg.measurements_dir, clock
        )
        check_baseline(idle, cfg.baseline_check.expected_w, cfg.baseline_check.tolerance_w)
        log.info("idle baseline %.1f W within band", idle)

    datasets = [d for d in cfg.datasets if only_dataset in (None, d.name)]
    if only_dataset and not datasets:
        raise SplitCacheError(f"dataset {only_dataset!r} not in config")
    model_specs = [m for m in cfg.models if only_models is None or m.name in only_models]

    records = []
    for ds_cfg in datasets:
        split = prepare_split(cfg, ds_cfg, force=force_resplit)
        for spec in model_specs:
            key = (spec.name, ds_cfg.name, cfg.pipeline)
            if key in done:
                log.info("skipping completed run %s", key)
                continue
            log.info("running %s on %s", spec.name, ds_cfg.name)
            record = run_experiment(
                cfg, ds_cfg, spec, split, clock,
                priors.get((spec.name, ds_cfg.name)),
            )
            records.append(record)
            with open(results_path, "a") as fh:
                for row in _format_rows(record):
                    fh.write("\t".join(row) + "\n")
            manifest = records_dir / f"{ds_cfg.name}__{cfg.pipeline}__{spec.name}.json"
            manifest.write_text(json.dumps(record.to_json(), indent=2) + "\n")
            if record.energy is not None:
                priors.setdefault((spec.name, ds_cfg.name), []).append(
                    record.energy.e_experiment_wh
                )
    return records
