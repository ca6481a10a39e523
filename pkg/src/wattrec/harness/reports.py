"""Comparison and efficiency tables computed from persisted results.

Reports are pure views over the results TSV: percentages recompute
exactly from the stored records.  Failed runs render as empty cells with
a footnote line.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from wattrec.errors import ConfigError, DataError
from wattrec.models.registry import RANKING_ENSEMBLES, RATING_ENSEMBLES

log = logging.getLogger(__name__)

PRIMARY_METRIC = {"rating": "rmse", "ranking": "ndcg@10"}


def load_records(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DataError(f"results file not found: {path}")
    frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False)
    for col in ("metric_value", "cv_mean", "cv_std", "energy_wh", "carbon_g",
                "fit_s", "predict_s"):
        frame[col] = pd.to_numeric(frame[col].replace("", np.nan))
    return frame


def _pipeline_of(frame: pd.DataFrame) -> str:
    pipelines = frame["pipeline"].unique()
    if len(pipelines) != 1:
        raise DataError(f"records mix pipelines {sorted(pipelines)}; filter first")
    return pipelines[0]


def _value_table(frame: pd.DataFrame, value: str) -> pd.DataFrame:
    """Per-(model, dataset) value: the primary accuracy metric or energy."""
    pipeline = _pipeline_of(frame)
    ok = frame[frame["status"] == "ok"]
    if value == "accuracy":
        rows = ok[ok["metric_name"] == PRIMARY_METRIC[pipeline]]
        return rows.pivot_table(index="model", columns="dataset",
                                values="metric_value", aggfunc="first")
    if value == "energy":
        rows = ok.drop_duplicates(["model", "dataset"])
        return rows.pivot_table(index="model", columns="dataset",
                                values="energy_wh", aggfunc="first")
    raise ConfigError(f"unknown report value {value!r}")


def _failures(frame: pd.DataFrame) -> List[str]:
    failed = frame[frame["status"] != "ok"].drop_duplicates(["model", "dataset"])
    return [
        f"{row.model} on {row.dataset}: {row.status}"
        for row in failed.itertuples()
    ]


def report_comparison(
    frame: pd.DataFrame,
    reference: str,
    value: str = "accuracy",
) -> Tuple[pd.DataFrame, List[str]]:
    """Per-dataset values, cross-dataset average, and percent vs reference.

    The percentage is 100 * (avg_model - avg_ref) / avg_ref for every
    value kind, so lower-is-better metrics read negative-is-better and
    higher-is-better metrics read positive-is-better.
    """
    table = _value_table(frame, value)
    if reference not in table.index:
        raise DataError(f"reference model {reference!r} has no records")

    datasets = sorted(table.columns)
    table = table.reindex(columns=datasets)
    avg = table.mean(axis=1, skipna=False)  # any missing dataset -> missing average
    ref_avg = avg.loc[reference]
    pct = 100.0 * (avg - ref_avg) / ref_avg if ref_avg and not np.isnan(ref_avg) else avg * np.nan

    out = table.copy()
    out["avg"] = avg
    out[f"pct_vs_{reference}"] = pct
    out = out.reset_index()
    return out, _failures(frame)


def report_efficiency(frame: pd.DataFrame) -> Tuple[pd.DataFrame, List[str]]:
    """Ensemble accuracy improvement and energy overhead vs best single model.

    The best single model is picked per dataset among non-ensembles
    (lowest RMSE or highest NDCG); improvements are positive when the
    ensemble is more accurate.
    """
    pipeline = _pipeline_of(frame)
    ensembles = set(RATING_ENSEMBLES if pipeline == "rating" else RANKING_ENSEMBLES)
    lower_better = pipeline == "rating"

    acc = _value_table(frame, "accuracy")
    energy = _value_table(frame, "energy")
    singles = [m for m in acc.index if m not in ensembles]
    if not any(m in ensembles for m in acc.index):
        raise DataError("no ensemble records to report")

    rows = []
    for dataset in acc.columns:
        series = acc.loc[singles, dataset].dropna()
        if series.empty:
            continue
        best_single = series.idxmin() if lower_better else series.idxmax()
        best_acc = series.loc[best_single]
        best_energy = energy.loc[best_single, dataset] if dataset in energy.columns else np.nan
        for model in acc.index:
            if model not in ensembles or np.isnan(acc.loc[model, dataset]):
                continue
            ens_acc = acc.loc[model, dataset]
            improvement = (
                100.0 * (best_acc - ens_acc) / best_acc
                if lower_better else 100.0 * (ens_acc - best_acc) / best_acc
            )
            ens_energy = energy.loc[model, dataset] if dataset in energy.columns else np.nan
            overhead = (
                100.0 * (ens_energy / best_energy - 1.0)
                if best_energy and not np.isnan(best_energy) and not np.isnan(ens_energy)
                else np.nan
            )
            rows.append({
                "ensemble": model,
                "dataset": dataset,
                "best_single": best_single,
                "accuracy_improvement_pct": improvement,
                "energy_overhead_pct": overhead,
            })
    return pd.DataFrame(rows), _failures(frame)


def write_report(table: pd.DataFrame, footnotes: List[str],
                 path: Optional[Union[str, Path]] = None) -> str:
    text = table.to_csv(sep="\t", index=False, float_format="%.6f")
    for note in footnotes:
        text += f"# failed: {note}\n"
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text
