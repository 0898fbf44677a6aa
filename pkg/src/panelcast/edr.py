"""Edit Distance on Real sequence and predictor ranking."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import IndicatorPanel, zscore

DEFAULT_EPSILON = 0.25
DEFAULT_K = 10


class EdrError(ValueError):
    pass


class EmptyPanelError(EdrError):
    pass


class SelectionError(EdrError):
    pass


@dataclass(frozen=True)
class EdrParams:
    epsilon: float = DEFAULT_EPSILON
    k: int = DEFAULT_K

    def __post_init__(self):
        if not self.epsilon > 0:
            raise EdrError(f"epsilon must be positive, got {self.epsilon}")
        if self.k < 1:
            raise EdrError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class RankEntry:
    indicator_id: str
    distance: int
    similarity: float


@dataclass(frozen=True)
class FeatureRanking:
    entries: tuple[RankEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return [e.indicator_id for e in self.entries]


def edr_distance(a: Sequence[float], b: Sequence[float], epsilon: float) -> int:
    """Minimum number of insert/delete/substitute edits aligning ``a`` to ``b``.

    Two elements match (cost 0) when they differ by at most ``epsilon``.
    """
    if not epsilon > 0:
        raise EdrError(f"epsilon must be positive, got {epsilon}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return n + m

    mismatch = (np.abs(a[:, None] - b[None, :]) > epsilon).astype(np.int64)
    cols = np.arange(m + 1, dtype=np.int64)
    prev = cols.copy()
    for i in range(1, n + 1):
        # best of diagonal and vertical moves, then fold in horizontal moves:
        # cur[j] = min_{k<=j} cand[k] + (j - k)
        cand = np.empty(m + 1, dtype=np.int64)
        cand[0] = i
        cand[1:] = np.minimum(prev[:-1] + mismatch[i - 1], prev[1:] + 1)
        prev = np.minimum.accumulate(cand - cols) + cols
    return int(prev[-1])


def rank_predictors(panel: IndicatorPanel, params: EdrParams) -> FeatureRanking:
    """Rank every predictor of ``panel`` by EDR distance to the z-scored target."""
    if not panel.predictors:
        raise EmptyPanelError(f"{panel.country}: panel has no predictors")
    target = zscore(panel.target.values)
    entries = []
    for pid, series in panel.predictors.items():
        z = zscore(series.values)
        dist = edr_distance(target, z, params.epsilon)
        entries.append(RankEntry(pid, dist, 1.0 - dist / max(len(target), len(z))))
    entries.sort(key=lambda e: (e.distance, e.indicator_id))
    return FeatureRanking(tuple(entries))


def select_top_k(ranking: FeatureRanking, k: int) -> list[str]:
    if k < 1 or k > len(ranking):
        raise SelectionError(f"cannot select {k} of {len(ranking)} ranked predictors")
    return ranking.ids()[:k]


def write_ranking_csv(ranking: FeatureRanking, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["indicator_id", "distance", "similarity", "rank"])
        for rank, e in enumerate(ranking.entries, start=1):
            writer.writerow([e.indicator_id, e.distance, repr(e.similarity), rank])


def read_ranking_csv(path) -> FeatureRanking:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["rank"]))
    return FeatureRanking(tuple(
        RankEntry(r["indicator_id"], int(r["distance"]), float(r["similarity"])) for r in rows
    ))
