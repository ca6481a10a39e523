"""Loading, cleaning, and validation of user-item rating data.

Raw interaction files are parsed into :class:`Dataset` objects holding a
pandas frame with the standardized columns ``user``, ``item``, ``rating``
and (optionally) ``timestamp``.  Cleaning is a fixed three-step pipeline:
deduplication, missing-value removal, rating-scale filtering.  Explicit
datasets convert to implicit feedback by thresholding ratings.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Union

import numpy as np
import pandas as pd

from wattrec.errors import DataError

log = logging.getLogger(__name__)

COLUMNS = ("user", "item", "rating", "timestamp")


class Interaction(NamedTuple):
    user: str
    item: str
    rating: float
    timestamp: Optional[int] = None


@dataclass(frozen=True)
class RatingScale:
    """Inclusive rating bounds declared for a dataset."""

    min: float
    max: float

    def __post_init__(self):
        if not self.min < self.max:
            raise DataError(f"rating scale requires min < max, got [{self.min}, {self.max}]")

    def contains(self, value: float) -> bool:
        return self.min <= value <= self.max

    @property
    def span(self) -> float:
        return self.max - self.min

    def default_implicit_threshold(self) -> float:
        """Positive-interaction cutoff: 4.0 on 5-star scales, 7.0 on 10-star."""
        if self.max == 5:
            return 4.0
        if self.max == 10:
            return 7.0
        raise DataError(
            f"no default implicit threshold for scale [{self.min}, {self.max}]; pass one explicitly"
        )


@dataclass(frozen=True)
class ColumnMapping:
    """Maps source-file columns onto the standardized names.

    Columns are header names when ``header`` is true, zero-based positions
    otherwise.  RecBole-style typed headers (``user_id:token``) match on
    the part before the colon as well as the full token.
    """

    user_column: Union[str, int] = "user"
    item_column: Union[str, int] = "item"
    rating_column: Union[str, int] = "rating"
    timestamp_column: Optional[Union[str, int]] = None
    delimiter: str = "\t"
    header: bool = True

    def __post_init__(self):
        mandatory = [self.user_column, self.item_column, self.rating_column]
        if len(set(mandatory)) != 3:
            raise DataError(f"user/item/rating columns must be distinct, got {mandatory}")


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of explicit-rating interactions.

    The frame always carries ``user``/``item``/``rating`` columns (user and
    item as strings, rating as float); ``timestamp`` is present only when it
    was mapped.  Treat the frame as read-only: transformations return new
    datasets and a dataset may be shared across threads.
    """

    name: str
    frame: pd.DataFrame = field(repr=False)
    scale: RatingScale

    @property
    def n_ratings(self) -> int:
        return len(self.frame)

    @property
    def n_users(self) -> int:
        return self.frame["user"].nunique()

    @property
    def n_items(self) -> int:
        return self.frame["item"].nunique()

    @property
    def has_timestamps(self) -> bool:
        return "timestamp" in self.frame.columns

    @property
    def interactions(self) -> Iterator[Interaction]:
        ts = self.frame["timestamp"] if self.has_timestamps else None
        for pos, row in enumerate(self.frame.itertuples(index=False)):
            t = None
            if ts is not None:
                raw = ts.iloc[pos]
                t = None if pd.isna(raw) else int(raw)
            yield Interaction(row.user, row.item, row.rating, t)

    def with_frame(self, frame: pd.DataFrame) -> "Dataset":
        return Dataset(self.name, frame, self.scale)


@dataclass(frozen=True)
class ImplicitDataset:
    """Positive (user, item) pairs derived by thresholding ratings."""

    name: str
    frame: pd.DataFrame = field(repr=False)  # columns: user, item
    threshold: float

    @property
    def n_positives(self) -> int:
        return len(self.frame)

    @property
    def n_users(self) -> int:
        return self.frame["user"].nunique()

    @property
    def n_items(self) -> int:
        return self.frame["item"].nunique()

    @property
    def pairs(self) -> list:
        return list(zip(self.frame["user"], self.frame["item"]))

    def with_frame(self, frame: pd.DataFrame) -> "ImplicitDataset":
        return ImplicitDataset(self.name, frame, self.threshold)


class DatasetStats(NamedTuple):
    n_users: int
    n_items: int
    n_ratings: int
    sparsity: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "users": self.n_users,
                "items": self.n_items,
                "ratings": self.n_ratings,
                "sparsity": round(self.sparsity, 4),
            }
        )


def _resolve_column(columns: list, wanted: Union[str, int], path) -> object:
    """Find a mapped column among the file's headers."""
    if wanted in columns:
        return wanted
    # RecBole-style "name:type" tokens
    stripped = {str(c).split(":")[0]: c for c in columns}
    if isinstance(wanted, str) and wanted in stripped:
        return stripped[wanted]
    raise DataError(f"{path}: mapped column {wanted!r} not found (columns: {list(columns)})")


def _parse_numeric(raw: pd.Series, what: str, path, header: bool) -> pd.Series:
    """Parse a string column to float; empty cells become NaN, garbage raises."""
    stripped = raw.str.strip()
    missing = stripped == ""
    values = pd.to_numeric(stripped.where(~missing), errors="coerce")
    bad = values.isna() & ~missing
    if bad.any():
        pos = int(np.nonzero(bad.to_numpy())[0][0])
        line = pos + 2 if header else pos + 1
        raise DataError(f"{path}: unparseable {what} {stripped.iloc[pos]!r} at line {line}")
    return values


def load_interactions(
    path: Union[str, Path],
    mapping: Optional[ColumnMapping] = None,
    scale: RatingScale = RatingScale(1, 5),
    name: Optional[str] = None,
) -> Dataset:
    """Load a delimited interaction file in raw (pre-cleaning) form.

    Row order is preserved; ratings must parse as numbers (empty cells are
    kept as missing for :func:`drop_missing` to handle).
    """
    path = Path(path)
    mapping = mapping or ColumnMapping()
    if not path.exists():
        raise DataError(f"interaction file not found: {path}")

    raw = pd.read_csv(
        path,
        sep=mapping.delimiter,
        header=0 if mapping.header else None,
        dtype=str,
        keep_default_na=False,
        encoding="utf-8",
    )

    cols = list(raw.columns)
    out = pd.DataFrame(index=raw.index)
    user_col = _resolve_column(cols, mapping.user_column, path)
    item_col = _resolve_column(cols, mapping.item_column, path)
    rating_col = _resolve_column(cols, mapping.rating_column, path)

    out["user"] = raw[user_col].str.strip().replace("", np.nan)
    out["item"] = raw[item_col].str.strip().replace("", np.nan)
    out["rating"] = _parse_numeric(raw[rating_col], "rating", path, mapping.header).astype(np.float64)
    if mapping.timestamp_column is not None:
        ts_col = _resolve_column(cols, mapping.timestamp_column, path)
        out["timestamp"] = _parse_numeric(raw[ts_col], "timestamp", path, mapping.header)

    out = out.reset_index(drop=True)
    return Dataset(name or path.stem, out, scale)


def deduplicate(d: Dataset) -> Dataset:
    """Keep one interaction per (user, item) pair.

    With timestamps the most recent record survives; without them (or on
    ties) the last occurrence in file order wins.  Surviving rows keep
    their original relative order.
    """
    frame = d.frame
    if d.has_timestamps:
        order = frame["timestamp"].fillna(-np.inf).argsort(kind="stable")
        picked = frame.iloc[order].drop_duplicates(["user", "item"], keep="last")
        picked = picked.sort_index()
    else:
        picked = frame.drop_duplicates(["user", "item"], keep="last")
    removed = len(frame) - len(picked)
    if removed:
        log.info("%s: removed %d duplicate interactions", d.name, removed)
    return d.with_frame(picked.reset_index(drop=True))


def drop_missing(d: Dataset) -> Dataset:
    """Remove records lacking a user, item, or rating."""
    frame = d.frame
    kept = frame.dropna(subset=["user", "item", "rating"])
    removed = len(frame) - len(kept)
    if removed:
        log.info("%s: removed %d records with missing fields", d.name, removed)
    if kept.empty:
        log.warning("%s: dataset is empty after missing-value removal", d.name)
    return d.with_frame(kept.reset_index(drop=True))


def filter_rating_scale(d: Dataset) -> Dataset:
    """Remove ratings outside the declared scale (e.g. Anime's -1 sentinel)."""
    frame = d.frame
    ok = (frame["rating"] >= d.scale.min) & (frame["rating"] <= d.scale.max)
    removed = int((~ok).sum())
    if removed:
        log.info(
            "%s: removed %d ratings outside scale [%g, %g]",
            d.name, removed, d.scale.min, d.scale.max,
        )
    return d.with_frame(frame[ok].reset_index(drop=True))


def clean(d: Dataset) -> Dataset:
    """Full cleaning pipeline: deduplicate, drop missing, filter scale."""
    return filter_rating_scale(drop_missing(deduplicate(d)))


def compute_stats(d: Dataset) -> DatasetStats:
    if d.n_ratings == 0:
        raise DataError(f"{d.name}: cannot compute statistics of an empty dataset")
    n_users, n_items, n = d.n_users, d.n_items, d.n_ratings
    sparsity = 1.0 - n / (n_users * n_items)
    return DatasetStats(n_users, n_items, n, sparsity)


def convert_implicit(d: Dataset, threshold: Optional[float] = None) -> ImplicitDataset:
    """Threshold ratings into positive interactions (rating >= threshold)."""
    if threshold is None:
        threshold = d.scale.default_implicit_threshold()
    if not d.scale.contains(threshold):
        raise DataError(
            f"implicit threshold {threshold} outside scale [{d.scale.min}, {d.scale.max}]"
        )
    positives = d.frame[d.frame["rating"] >= threshold][["user", "item"]]
    if positives.empty:
        log.warning("%s: no ratings reach the implicit threshold %g", d.name, threshold)
    return ImplicitDataset(d.name, positives.reset_index(drop=True), threshold)


def generate_synthetic(
    seed: int,
    n_users: int,
    n_items: int,
    density: float,
    scale: RatingScale = RatingScale(1, 5),
    latent_rank: int = 2,
    noise: float = 0.1,
    name: Optional[str] = None,
) -> Dataset:
    """Deterministic low-rank-plus-noise test fixture.

    Ratings come from a rank-``latent_rank`` factor model scaled into the
    rating range, perturbed by Gaussian noise of the given relative
    magnitude, and clamped to the scale.
    """
    if not 0 < density <= 1:
        raise DataError(f"density must be in (0, 1], got {density}")
    n_cells = int(round(density * n_users * n_items))
    if n_cells < 1:
        raise DataError("density * n_users * n_items must be at least 1")

    rng = np.random.default_rng(seed)
    u = rng.standard_normal((n_users, latent_rank))
    v = rng.standard_normal((n_items, latent_rank))
    base = (u @ v.T) / np.sqrt(latent_rank)

    mid = (scale.min + scale.max) / 2.0
    ratings_full = mid + base * (scale.span / 4.0)
    ratings_full += noise * scale.span * rng.standard_normal(ratings_full.shape)
    ratings_full = np.clip(ratings_full, scale.min, scale.max)

    flat = rng.choice(n_users * n_items, size=n_cells, replace=False)
    flat.sort()
    uidx, iidx = np.divmod(flat, n_items)
    frame = pd.DataFrame(
        {
            "user": [f"u{k}" for k in uidx],
            "item": [f"i{k}" for k in iidx],
            "rating": ratings_full[uidx, iidx],
        }
    )
    return Dataset(name or f"synthetic-{seed}", frame, scale)


def save_dataset(d: Dataset, path: Union[str, Path]) -> None:
    """Write a cleaned-dataset cache as headered TSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = d.frame.copy()
    if "timestamp" in frame.columns:
        frame["timestamp"] = frame["timestamp"].map(
            lambda t: "" if pd.isna(t) else str(int(t))
        )
    frame.to_csv(path, sep="\t", index=False)


def save_stats(d: Dataset, path: Union[str, Path]) -> DatasetStats:
    stats = compute_stats(d)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(stats.to_json() + "\n", encoding="utf-8")
    return stats
