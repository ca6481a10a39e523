"""Deterministic train/test splits and cross-validation folds.

Two strategies: a global random holdout (rating pipeline) and a per-user
holdout that guarantees every test user also appears in training (ranking
pipeline).  Splits are cached on disk as TSV plus a JSON manifest whose
checksum makes any partition auditable and tamper-evident.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd

from wattrec.data import Dataset, ImplicitDataset, RatingScale
from wattrec.errors import ConfigError, DataError, SplitCacheError

log = logging.getLogger(__name__)

AnyDataset = Union[Dataset, ImplicitDataset]


@dataclass(frozen=True)
class SplitConfig:
    strategy: str = "global"  # "global" | "per-user"
    train_fraction: float = 0.8
    seed: int = 0
    min_interactions_per_user: int = 10
    min_test_items_per_user: int = 1

    def __post_init__(self):
        if self.strategy not in ("global", "per-user"):
            raise ConfigError(f"unknown split strategy {self.strategy!r}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.min_interactions_per_user < 1 or self.min_test_items_per_user < 1:
            raise ConfigError("per-user minimums must be at least 1")


@dataclass(frozen=True)
class TrainTestSplit:
    train: AnyDataset
    test: AnyDataset
    config: SplitConfig
    checksum: str = field(default="")

    def __post_init__(self):
        if not self.checksum:
            object.__setattr__(self, "checksum", partition_checksum(self.train, self.test))


@dataclass(frozen=True)
class FoldSet:
    """k validation partitions with their matching training remainders."""

    k: int
    folds: Tuple[Tuple[AnyDataset, AnyDataset], ...]  # (train_part, validation)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _serialize(d: AnyDataset) -> bytes:
    frame = d.frame
    return frame.to_csv(sep="\t", index=False).encode("utf-8")


def partition_checksum(train: AnyDataset, test: AnyDataset) -> str:
    h = hashlib.sha256()
    h.update(_serialize(train))
    h.update(_serialize(test))
    return h.hexdigest()


def global_random_split(d: Dataset, cfg: SplitConfig) -> TrainTestSplit:
    """Split interactions uniformly at random, ignoring user boundaries."""
    if cfg.strategy != "global":
        raise ConfigError("global_random_split requires strategy='global'")
    n = d.n_ratings
    if n < 2:
        raise DataError(f"{d.name}: need at least 2 interactions to split, have {n}")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_train = _round_half_up(cfg.train_fraction * n)
    n_train = min(max(n_train, 1), n - 1)

    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    train = d.with_frame(d.frame.iloc[train_idx].reset_index(drop=True))
    test = d.with_frame(d.frame.iloc[test_idx].reset_index(drop=True))
    return TrainTestSplit(train, test, cfg)


def per_user_split(d: AnyDataset, cfg: SplitConfig) -> TrainTestSplit:
    """Hold out a fraction of each user's interactions.

    Users with fewer than ``min_interactions_per_user`` interactions are
    removed entirely; every surviving user contributes at least
    ``min_test_items_per_user`` test rows and always keeps at least one
    training row, so test users are a subset of train users.
    """
    if cfg.strategy != "per-user":
        raise ConfigError("per_user_split requires strategy='per-user'")

    frame = d.frame
    rng = np.random.default_rng(cfg.seed)
    test_fraction = 1.0 - cfg.train_fraction

    counts = frame.groupby("user", sort=True).size()
    eligible = counts[counts >= cfg.min_interactions_per_user]
    if eligible.empty:
        raise DataError(
            f"{d.name}: no user has {cfg.min_interactions_per_user}+ interactions"
        )
    if len(eligible) < len(counts):
        log.info(
            "%s: dropped %d users below %d interactions",
            d.name, len(counts) - len(eligible), cfg.min_interactions_per_user,
        )

    positions = frame.groupby("user", sort=True).indices
    train_idx: List[np.ndarray] = []
    test_idx: List[np.ndarray] = []
    for user in eligible.index:
        rows = positions[user]
        n = len(rows)
        n_test = max(cfg.min_test_items_per_user, _round_half_up(test_fraction * n))
        n_test = min(n_test, n - 1)
        order = rng.permutation(n)
        test_idx.append(rows[order[:n_test]])
        train_idx.append(rows[order[n_test:]])

    train_rows = np.sort(np.concatenate(train_idx))
    test_rows = np.sort(np.concatenate(test_idx))
    train = d.with_frame(frame.iloc[train_rows].reset_index(drop=True))
    test = d.with_frame(frame.iloc[test_rows].reset_index(drop=True))
    return TrainTestSplit(train, test, cfg)


def split(d: AnyDataset, cfg: SplitConfig) -> TrainTestSplit:
    if cfg.strategy == "global":
        return global_random_split(d, cfg)
    return per_user_split(d, cfg)


def kfold_global(train: Dataset, k: int = 5, seed: int = 0) -> FoldSet:
    """Partition interactions into k disjoint folds of near-equal size."""
    n = train.n_ratings
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    if k > n:
        raise DataError(f"cannot make {k} folds from {n} interactions")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    chunks = np.array_split(perm, k)
    folds = []
    for chunk in chunks:
        val_rows = np.sort(chunk)
        mask = np.ones(n, dtype=bool)
        mask[val_rows] = False
        train_part = train.with_frame(train.frame.iloc[mask].reset_index(drop=True))
        val_part = train.with_frame(train.frame.iloc[val_rows].reset_index(drop=True))
        folds.append((train_part, val_part))
    return FoldSet(k, tuple(folds))


def kfold_per_user(
    train: ImplicitDataset,
    k: int = 5,
    seed: int = 0,
    min_user_interactions: int = 5,
) -> FoldSet:
    """k per-user validation partitions over the training set.

    Each fold independently holds out 1/k of every eligible user's items
    (at least one).  Users below ``min_user_interactions`` never appear in
    a validation partition but stay in every fold's training remainder.
    """
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    frame = train.frame
    counts = frame.groupby("user", sort=True).size()
    eligible = counts[counts >= min_user_interactions].index
    if len(eligible) == 0:
        raise DataError(
            f"{train.name}: no user has {min_user_interactions}+ interactions for CV"
        )

    rng = np.random.default_rng(seed)
    positions = frame.groupby("user", sort=True).indices
    fraction = 1.0 / k
    n_rows = len(frame)

    folds = []
    for _ in range(k):
        held: List[np.ndarray] = []
        for user in eligible:
            rows = positions[user]
            n = len(rows)
            n_val = min(max(1, _round_half_up(fraction * n)), n - 1)
            order = rng.permutation(n)
            held.append(rows[order[:n_val]])
        val_rows = np.sort(np.concatenate(held))
        mask = np.ones(n_rows, dtype=bool)
        mask[val_rows] = False
        train_part = train.with_frame(frame.iloc[mask].reset_index(drop=True))
        val_part = train.with_frame(frame.iloc[val_rows].reset_index(drop=True))
        folds.append((train_part, val_part))
    return FoldSet(k, tuple(folds))


def cache_split(s: TrainTestSplit, directory: Union[str, Path]) -> Path:
    """Persist a split as ``train.tsv`` + ``test.tsv`` + ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    train_bytes = _serialize(s.train)
    test_bytes = _serialize(s.test)
    (directory / "train.tsv").write_bytes(train_bytes)
    (directory / "test.tsv").write_bytes(test_bytes)

    implicit = isinstance(s.train, ImplicitDataset)
    manifest = {
        "dataset": s.train.name,
        "kind": "implicit" if implicit else "explicit",
        "config": asdict(s.config),
        "checksum": s.checksum,
        "n_train": len(s.train.frame),
        "n_test": len(s.test.frame),
    }
    if implicit:
        manifest["threshold"] = s.train.threshold
    else:
        manifest["scale"] = [s.train.scale.min, s.train.scale.max]
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return directory


def _read_part(path: Path, manifest: dict) -> AnyDataset:
    frame = pd.read_csv(path, sep="\t", dtype={"user": str, "item": str})
    if manifest["kind"] == "implicit":
        return ImplicitDataset(manifest["dataset"], frame, manifest["threshold"])
    lo, hi = manifest["scale"]
    frame["rating"] = frame["rating"].astype(float)
    return Dataset(manifest["dataset"], frame, RatingScale(lo, hi))


def load_split(directory: Union[str, Path]) -> TrainTestSplit:
    """Load a cached split, verifying the partition checksum."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise SplitCacheError(f"no split manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())

    train = _read_part(directory / "train.tsv", manifest)
    test = _read_part(directory / "test.tsv", manifest)
    checksum = partition_checksum(train, test)
    if checksum != manifest["checksum"]:
        raise SplitCacheError(
            f"{directory}: split checksum mismatch "
            f"(expected {manifest['checksum'][:12]}..., got {checksum[:12]}...)"
        )
    cfg = SplitConfig(**manifest["config"])
    return TrainTestSplit(train, test, cfg, checksum)


def has_cached_split(directory: Union[str, Path]) -> bool:
    return (Path(directory) / "manifest.json").exists()
