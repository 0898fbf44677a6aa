"""Forecast accuracy metrics, temporal splitting, and grid-search tuning."""
from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import gbtree
from .gbtree import GbtParams, PARAM_ORDER
from .ingest import IndicatorPanel

log = logging.getLogger(__name__)

DEFAULT_DELTA = 1e-8
DEFAULT_OFFSET = 3.0


class EvaluationError(ValueError):
    pass


class NearZeroActualError(EvaluationError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"actual value {value!r} at index {index} is too close to zero for MAPE")


class SchemeError(EvaluationError):
    pass


class SearchError(EvaluationError):
    pass


class Band(str, enum.Enum):
    HIGHLY_ACCURATE = "highly_accurate"
    GOOD = "good"
    REASONABLE = "reasonable"
    INACCURATE = "inaccurate"


def mape(actual, forecast, delta: float = DEFAULT_DELTA) -> float:
    """Mean absolute percentage error, in percent."""
    A = np.asarray(actual, dtype=float)
    F = np.asarray(forecast, dtype=float)
    if A.shape != F.shape or A.ndim != 1 or len(A) == 0:
        raise EvaluationError("actual and forecast must be non-empty 1-d sequences of equal length")
    small = np.flatnonzero(np.abs(A) < delta)
    if len(small):
        raise NearZeroActualError(int(small[0]), float(A[small[0]]))
    return float(np.mean(np.abs((A - F) / A)) * 100)


def shifted_mape(actual, forecast, offset: float = DEFAULT_OFFSET, delta: float = DEFAULT_DELTA) -> float:
    """MAPE after adding ``offset`` to both series.

    Keeps the metric defined for a target that crosses zero.
    """
    return mape(np.asarray(actual, dtype=float) + offset,
                np.asarray(forecast, dtype=float) + offset, delta)


def lewis_band(mape_value: float) -> Band:
    if not mape_value >= 0:
        raise EvaluationError(f"MAPE must be non-negative, got {mape_value}")
    if mape_value < 10:
        return Band.HIGHLY_ACCURATE
    if mape_value < 20:
        return Band.GOOD
    if mape_value < 50:
        return Band.REASONABLE
    return Band.INACCURATE


@dataclass(frozen=True)
class SplitSpec:
    train_years: tuple[int, int] = (1996, 2018)
    test_years: tuple[int, int] = (2019, 2023)

    def __post_init__(self):
        (a, b), (c, d) = self.train_years, self.test_years
        if a > b or c > d:
            raise EvaluationError("split ranges must be (start, end) with start <= end")
        if b >= c:
            raise EvaluationError(f"training ends in {b}, not before test start {c}")


@dataclass(frozen=True)
class CvScheme:
    min_train_size: int = 15
    fold_horizon: int = 2

    def __post_init__(self):
        if self.min_train_size < 8:
            raise SchemeError("min_train_size must be >= 8")
        if self.fold_horizon < 1:
            raise SchemeError("fold_horizon must be >= 1")


def expanding_folds(years: Sequence[int], scheme: CvScheme) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Expanding-window folds over ``years``.

    Fold i trains on the first ``min_train_size + i * fold_horizon`` years and
    validates on the following ``fold_horizon`` years; the final fold may be
    shorter when the years run out.
    """
    years = tuple(years)
    if len(years) < scheme.min_train_size + scheme.fold_horizon:
        raise SchemeError(
            f"{len(years)} years cannot hold {scheme.min_train_size} training "
            f"+ {scheme.fold_horizon} validation years"
        )
    folds = []
    cut = scheme.min_train_size
    while cut < len(years):
        folds.append((years[:cut], years[cut:cut + scheme.fold_horizon]))
        cut += scheme.fold_horizon
    return folds


def expand_grid(grid: Mapping[str, Sequence], base: Optional[GbtParams] = None) -> list[GbtParams]:
    """Cartesian product of ``grid`` over ``base``, in table parameter order."""
    base = base or GbtParams()
    unknown = set(grid) - set(PARAM_ORDER)
    if unknown:
        raise SearchError(f"unknown grid parameters: {sorted(unknown)}")
    names = [p for p in PARAM_ORDER if p in grid]
    for name in names:
        if len(grid[name]) == 0:
            raise SearchError(f"grid parameter {name!r} has no values")
    points = []
    for combo in itertools.product(*(grid[name] for name in names)):
        values = base.to_dict()
        values.update(zip(names, combo))
        points.append(GbtParams(**values))
    return points


@dataclass
class FoldResult:
    train_years: tuple[int, ...]
    val_years: tuple[int, ...]
    actual: np.ndarray
    predicted: np.ndarray
    score: float


@dataclass
class CandidateResult:
    params: GbtParams
    folds: list[FoldResult] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def score(self) -> float:
        if self.error is not None or not self.folds:
            return math.inf
        return float(np.mean([f.score for f in self.folds]))


def evaluate_candidate(panel: IndicatorPanel, selected: Sequence[str], params: GbtParams,
                       scheme: CvScheme, offset: float = DEFAULT_OFFSET) -> CandidateResult:
    X = panel.matrix(selected)
    y = panel.target.values
    result = CandidateResult(params)
    try:
        for train_years, val_years in expanding_folds(panel.years, scheme):
            tr = slice(0, len(train_years))
            va = slice(len(train_years), len(train_years) + len(val_years))
            model = gbtree.fit(X[tr], y[tr], params)
            pred = model.predict(X[va])
            result.folds.append(FoldResult(train_years, val_years, y[va].copy(), pred,
                                           shifted_mape(y[va], pred, offset)))
    except (gbtree.GbtError, EvaluationError) as exc:
        result.error = f"{type(exc).__name__}: {exc}"
        result.folds.clear()
    return result


@dataclass
class SearchResult:
    best_index: int
    candidates: list[CandidateResult]

    @property
    def best(self) -> CandidateResult:
        return self.candidates[self.best_index]

    @property
    def best_params(self) -> GbtParams:
        return self.best.params

    @property
    def best_score(self) -> float:
        return self.best.score

    def table(self) -> list[dict]:
        """One record per evaluated candidate, in enumeration order."""
        return [
            {
                "params": c.params.to_dict(),
                "fold_scores": [f.score for f in c.folds],
                "mean_score": None if c.error else c.score,
                "error": c.error,
            }
            for c in self.candidates
        ]


def grid_search(panel: IndicatorPanel, selected: Sequence[str], grid: Mapping[str, Sequence],
                scheme: CvScheme, base: Optional[GbtParams] = None,
                offset: float = DEFAULT_OFFSET) -> SearchResult:
    """Exhaustive search minimising the mean shifted MAPE across expanding folds.

    Every year in ``panel`` is used for cross-validation, so the caller passes
    a panel restricted to the training period. Ties keep the earliest
    candidate in enumeration order.
    """
    points = expand_grid(grid, base)
    candidates = []
    best = None
    for i, params in enumerate(points):
        res = evaluate_candidate(panel, selected, params, scheme, offset)
        log.debug("candidate %d/%d score=%s", i + 1, len(points), res.score)
        candidates.append(res)
        if res.error is None and (best is None or res.score < candidates[best].score):
            best = i
    if best is None:
        raise SearchError(f"all {len(points)} candidates failed; first error: {candidates[0].error}")
    return SearchResult(best, candidates)


@dataclass
class EvalReport:
    train_mape: float
    test_mape: float
    best_params: GbtParams
    fold_scores: list[float]
    train_band: Band = field(init=False)
    band: Band = field(init=False)

    def __post_init__(self):
        self.band = lewis_band(self.test_mape)
        self.train_band = lewis_band(self.train_mape)

    def to_dict(self) -> dict:
        return {
            "train_mape": self.train_mape,
            "test_mape": self.test_mape,
            "band": self.band.value,
            "train_band": self.train_band.value,
            "best_params": self.best_params.to_dict(),
            "fold_scores": list(self.fold_scores),
        }
