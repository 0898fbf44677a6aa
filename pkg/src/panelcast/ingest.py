"""Wide-format indicator CSV ingestion and panel construction.

The input layout is the one produced by the World Bank bulk download once the
country-code column is dropped: one row per (country, indicator) pair, three
leading identifier columns and one column per year::

    Country,Indicator,Code,1996,1997,...
    Oman,GDP (current US$),NY.GDP.MKTP.CD,1.3e10,..,...

Empty cells and the ``..`` sentinel are missing values.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

MISSING_SENTINELS = ("", "..")
DEFAULT_MAX_MISSING = 0.3

_YEAR_RE = re.compile(r"^(\d{4})(?:\s*\[YR\1\])?$")


class IngestError(ValueError):
    """Base class for ingestion failures."""


class FormatError(IngestError):
    pass


class CellError(IngestError):
    def __init__(self, row: int, year: int, value: str):
        self.row = row
        self.year = year
        self.value = value
        super().__init__(f"non-numeric cell {value!r} at row {row}, year {year}")


class MissingTargetError(IngestError):
    pass


class UnusableTargetError(IngestError):
    pass


@dataclass(frozen=True)
class RawRow:
    country: str
    indicator_name: str
    indicator_code: str
    values: Mapping[int, Optional[float]]


@dataclass(frozen=True)
class RawTable:
    years: tuple[int, ...]
    rows: tuple[RawRow, ...]

    def countries(self) -> list[str]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row.country, None)
        return list(seen)

    def rows_for(self, country: str) -> list[RawRow]:
        return [r for r in self.rows if r.country == country]


@dataclass(frozen=True)
class TimeSeries:
    id: str
    years: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.years),):
            raise ValueError(f"series {self.id!r}: {len(self.years)} years but {values.shape} values")
        if np.isnan(values).any():
            raise ValueError(f"series {self.id!r} contains missing values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.years)

    def slice(self, start: int, end: int) -> "TimeSeries":
        keep = [i for i, y in enumerate(self.years) if start <= y <= end]
        return TimeSeries(self.id, tuple(self.years[i] for i in keep), self.values[keep])


@dataclass(frozen=True)
class IndicatorPanel:
    country: str
    target: TimeSeries
    predictors: Mapping[str, TimeSeries]
    names: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for pid, series in self.predictors.items():
            if series.years != self.target.years:
                raise ValueError(f"predictor {pid!r} is not aligned with the target years")
        if self.target.id in self.predictors:
            raise ValueError(f"target {self.target.id!r} listed among its own predictors")

    @property
    def years(self) -> tuple[int, ...]:
        return self.target.years

    @property
    def year_range(self) -> tuple[int, int]:
        return self.years[0], self.years[-1]

    def slice(self, start: int, end: int) -> "IndicatorPanel":
        return IndicatorPanel(
            self.country,
            self.target.slice(start, end),
            {k: s.slice(start, end) for k, s in self.predictors.items()},
            self.names,
        )

    def matrix(self, ids: Sequence[str]) -> np.ndarray:
        """Rows are years, columns follow ``ids``."""
        if not ids:
            return np.empty((len(self.years), 0))
        return np.column_stack([self.predictors[i].values for i in ids])


def _parse_year(header: str) -> Optional[int]:
    m = _YEAR_RE.match(header.strip())
    return int(m.group(1)) if m else None


def parse_wide_csv(path) -> RawTable:
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if len(header) < 4:
            raise FormatError(f"{path}: expected country, indicator name, indicator code and year columns")
        years = []
        for col in header[3:]:
            year = _parse_year(col)
            if year is None:
                raise FormatError(f"{path}: column header {col!r} is not a year")
            years.append(year)
        if years != list(range(years[0], years[0] + len(years))):
            raise FormatError(f"{path}: year columns must be contiguous and ascending")

        rows = []
        for lineno, record in enumerate(reader, start=1):
            if not any(cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise FormatError(f"{path}: row {lineno} has {len(record)} cells, header has {len(header)}")
            values: dict[int, Optional[float]] = {}
            for year, cell in zip(years, record[3:]):
                cell = cell.strip()
                if cell in MISSING_SENTINELS:
                    values[year] = None
                    continue
                try:
                    values[year] = float(cell)
                except ValueError:
                    raise CellError(lineno, year, cell) from None
            rows.append(RawRow(record[0].strip(), record[1].strip(), record[2].strip(), values))
    return RawTable(tuple(years), tuple(rows))


def write_wide_csv(table: RawTable, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["Country", "Indicator", "Code", *map(str, table.years)])
        for row in table.rows:
            cells = [".." if row.values[y] is None else repr(row.values[y]) for y in table.years]
            writer.writerow([row.country, row.indicator_name, row.indicator_code, *cells])


def fill_interior_gaps(values: np.ndarray) -> Optional[np.ndarray]:
    """Linearly interpolate interior NaNs.

    Returns None when the first or last value is missing, since a boundary gap
    would have to be extrapolated. Observed values are copied through untouched.
    """
    values = np.asarray(values, dtype=float)
    missing = np.isnan(values)
    if not missing.any():
        return values.copy()
    if missing[0] or missing[-1]:
        return None
    idx = np.arange(len(values))
    out = values.copy()
    out[missing] = np.interp(idx[missing], idx[~missing], values[~missing])
    return out


def build_panel(
    table: RawTable,
    country: str,
    target_code: str,
    max_missing_fraction: float = DEFAULT_MAX_MISSING,
    year_range: Optional[tuple[int, int]] = None,
) -> IndicatorPanel:
    """Assemble a gap-filled, year-aligned panel for one country.

    Predictors are dropped when more than ``max_missing_fraction`` of their
    years are missing or when they are missing at either end of the year axis.
    """
    if not 0 <= max_missing_fraction < 1:
        raise ValueError("max_missing_fraction must lie in [0, 1)")
    if year_range is None:
        years = list(table.years)
    else:
        start, end = year_range
        years = [y for y in table.years if start <= y <= end]
    if len(years) < 2:
        raise IngestError(f"year range {year_range} leaves fewer than 2 years")

    rows = table.rows_for(country)
    target_rows = [r for r in rows if r.indicator_code == target_code]
    if not target_rows:
        raise MissingTargetError(f"{country}: target {target_code!r} not found")
    if len(target_rows) > 1:
        raise FormatError(f"{country}: target {target_code!r} appears more than once")

    def as_array(row: RawRow) -> np.ndarray:
        return np.array([np.nan if row.values[y] is None else row.values[y] for y in years])

    target_values = fill_interior_gaps(as_array(target_rows[0]))
    if target_values is None:
        raise UnusableTargetError(
            f"{country}: target {target_code!r} is missing at an end of {years[0]}-{years[-1]}"
        )
    target = TimeSeries(target_code, tuple(years), target_values)

    predictors: dict[str, TimeSeries] = {}
    names = {target_code: target_rows[0].indicator_name}
    for row in rows:
        code = row.indicator_code
        if code == target_code:
            continue
        if code in predictors:
            raise FormatError(f"{country}: indicator {code!r} appears more than once")
        raw = as_array(row)
        if np.isnan(raw).mean() > max_missing_fraction:
            continue
        filled = fill_interior_gaps(raw)
        if filled is None:
            continue
        predictors[code] = TimeSeries(code, tuple(years), filled)
        names[code] = row.indicator_name
    return IndicatorPanel(country, target, predictors, names)


def zscore(series) -> np.ndarray:
    """Standardize with the population standard deviation.

    Constant input maps to zeros.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("zscore needs a 1-d series of length >= 2")
    if np.ptp(x) == 0:
        return np.zeros_like(x)
    return (x - x.mean()) / x.std()
