"""End-to-end per-country run: select, tune, fit, evaluate, simulate, forecast."""
from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import arima, charts, gbtree
from .config import RunConfig
from .edr import FeatureRanking, rank_predictors, select_top_k, write_ranking_csv
from .evaluation import EvalReport, SearchResult, grid_search, shifted_mape
from .gbtree import GbtParams
from .ingest import IndicatorPanel, RawTable, build_panel, parse_wide_csv

log = logging.getLogger(__name__)

ARTIFACTS = ("forecast.csv", "report.json", "ranking.csv", "predictors.csv", "chart.svg")


class StageError(RuntimeError):
    def __init__(self, country: str, stage: str, cause: Exception):
        self.country = country
        self.stage = stage
        self.cause = cause
        super().__init__(f"{country}: {stage} failed: {type(cause).__name__}: {cause}")


class WriteError(OSError):
    pass


@dataclass
class ForecastBundle:
    country: str
    fitted_train: list[tuple[int, float, float]]
    fitted_test: list[tuple[int, float, float]]
    future: list[tuple[int, float]]
    report: EvalReport
    selected_features: list[str]
    ranking: FeatureRanking
    search: SearchResult
    predictor_paths: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    predictor_models: dict[str, arima.ArimaModel] = field(default_factory=dict)
    names: dict[str, str] = field(default_factory=dict)


class _Stage:
    """Context manager tagging any failure with the stage and country."""

    def __init__(self, country: str, name: str):
        self.country, self.name = country, name

    def __enter__(self):
        log.info("%s: %s", self.country, self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.country, self.name, exc) from exc
        return False


def prepare_panels(config: RunConfig, country: str,
                   table: Optional[RawTable] = None) -> tuple[IndicatorPanel, IndicatorPanel]:
    """Training-period panel and full (train + test) panel for one country.

    The training panel is built on its own so gap filling never reads test
    years, and it keeps only predictors that also survive in the full panel.
    """
    (train_start, train_end), (_, test_end) = config.split.train_years, config.split.test_years
    with _Stage(country, "ingest"):
        if table is None:
            table = parse_wide_csv(config.data_path)
        if country not in table.countries():
            raise KeyError(f"country {country!r} not present in data")
        train_panel = build_panel(table, country, config.target_code,
                                  config.max_missing_fraction, (train_start, train_end))
        full_panel = build_panel(table, country, config.target_code,
                                 config.max_missing_fraction, (train_start, test_end))
        if full_panel.year_range != (train_start, test_end):
            raise ValueError(f"data covers {full_panel.year_range}, split needs {train_start}-{test_end}")
        usable = sorted(set(train_panel.predictors) & set(full_panel.predictors))
        train_panel = IndicatorPanel(country, train_panel.target,
                                     {k: train_panel.predictors[k] for k in usable},
                                     train_panel.names)
    return train_panel, full_panel


def rank_country(config: RunConfig, country: str, table: Optional[RawTable] = None) -> FeatureRanking:
    train_panel, _ = prepare_panels(config, country, table)
    with _Stage(country, "select"):
        return rank_predictors(train_panel, config.edr)


def run_country(config: RunConfig, country: str, table: Optional[RawTable] = None,
                simulate: bool = True) -> ForecastBundle:
    """Run every stage for one country.

    Selection, tuning and the final fit see only training-year data. Predictor
    ARIMA models use the whole observed history, train and test.
    """
    test_start, test_end = config.split.test_years
    train_panel, full_panel = prepare_panels(config, country, table)

    with _Stage(country, "select"):
        ranking = rank_predictors(train_panel, config.edr)
        selected = select_top_k(ranking, config.edr.k)

    with _Stage(country, "tune"):
        base = GbtParams(seed=config.seed)
        search = grid_search(train_panel, selected, config.grid, config.cv, base, config.mape_offset)

    with _Stage(country, "fit"):
        X_train = train_panel.matrix(selected)
        y_train = train_panel.target.values
        model = gbtree.fit(X_train, y_train, search.best_params)
        train_pred = model.predict(X_train)

    with _Stage(country, "evaluate"):
        test_panel = full_panel.slice(test_start, test_end)
        X_test = test_panel.matrix(selected)
        y_test = test_panel.target.values
        test_pred = model.predict(X_test)
        report = EvalReport(
            shifted_mape(y_train, train_pred, config.mape_offset),
            shifted_mape(y_test, test_pred, config.mape_offset),
            search.best_params,
            [f.score for f in search.best.folds],
        )

    bundle = ForecastBundle(
        country,
        list(zip(train_panel.years, y_train.tolist(), train_pred.tolist())),
        list(zip(test_panel.years, y_test.tolist(), test_pred.tolist())),
        [],
        report,
        selected,
        ranking,
        search,
        names=dict(full_panel.names),
    )
    if not simulate:
        return bundle

    future_years = list(range(test_end + 1, test_end + 1 + config.horizon))
    with _Stage(country, "simulate"):
        columns = []
        for pid in selected:
            history = full_panel.predictors[pid].values
            fitted = arima.auto_fit(history)
            path = arima.forecast(fitted, history, config.horizon)
            bundle.predictor_models[pid] = fitted
            bundle.predictor_paths[pid] = list(zip(future_years, path.tolist()))
            columns.append(path)

    with _Stage(country, "forecast"):
        future_pred = model.predict(np.column_stack(columns))
        bundle.future = list(zip(future_years, future_pred.tolist()))
    return bundle


def slugify(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-") or "country"


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def report_document(bundle: ForecastBundle) -> dict:
    doc = bundle.report.to_dict()
    doc["country"] = bundle.country
    doc["selected_features"] = list(bundle.selected_features)
    doc["grid"] = bundle.search.table()
    doc["predictor_models"] = {
        pid: {
            "order": [m.order.p, m.order.d, m.order.q],
            "ar_coeffs": list(m.ar_coeffs),
            "ma_coeffs": list(m.ma_coeffs),
            "intercept": m.intercept,
            "sigma2": m.sigma2,
            "aic": None if m.fallback else m.aic,
            "fallback": m.fallback,
        }
        for pid, m in sorted(bundle.predictor_models.items())
    }
    return doc


def render_chart(bundle: ForecastBundle) -> str:
    actual = [(y, a) for y, a, _ in bundle.fitted_train + bundle.fitted_test]
    return charts.line_chart(
        f"{bundle.country}: target forecast",
        [
            ("actual", "#222222", actual),
            ("train fit", "#1f77b4", [(y, p) for y, _, p in bundle.fitted_train]),
            ("test fit", "#ff7f0e", [(y, p) for y, _, p in bundle.fitted_test]),
            ("future forecast", "#2ca02c", list(bundle.future)),
        ],
        y_label="index",
    )


def emit_artifacts(bundle: ForecastBundle, output_dir) -> list[tuple[Path, int]]:
    """Write the per-country artifact set and return (path, size) pairs."""
    out = Path(output_dir) / slugify(bundle.country)
    try:
        out.mkdir(parents=True, exist_ok=True)
        forecast_rows = (
            [(y, _num(a), _num(p), "train") for y, a, p in bundle.fitted_train]
            + [(y, _num(a), _num(p), "test") for y, a, p in bundle.fitted_test]
            + [(y, "", _num(p), "future") for y, p in bundle.future]
        )
        _write_csv(out / "forecast.csv", ["year", "actual", "predicted", "segment"], forecast_rows)
        (out / "report.json").write_text(
            json.dumps(report_document(bundle), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        write_ranking_csv(bundle.ranking, out / "ranking.csv")
        _write_csv(out / "predictors.csv", ["indicator_id", "year", "predicted"],
                   [(pid, y, _num(v)) for pid in bundle.selected_features
                    for y, v in bundle.predictor_paths.get(pid, [])])
        (out / "chart.svg").write_text(render_chart(bundle), encoding="utf-8")
    except OSError as exc:
        raise WriteError(f"cannot write artifacts to {out}: {exc}") from exc
    return [(out / name, (out / name).stat().st_size) for name in ARTIFACTS]


SUMMARY_HEADER = ["country", "status", "train_mape", "test_mape", "band", "mean_future", "error"]


def run_all(config: RunConfig, countries: Optional[Sequence[str]] = None,
            simulate: bool = True, emit: bool = True) -> tuple[list[dict], list[ForecastBundle]]:
    """Run each country independently; a failing country becomes an error row."""
    countries = list(countries or config.countries)
    table = parse_wide_csv(config.data_path)
    rows, bundles = [], []
    for country in countries:
        try:
            bundle = run_country(config, country, table, simulate=simulate)
            if emit:
                emit_artifacts(bundle, config.output_dir)
        except (StageError, WriteError) as exc:
            log.error("%s", exc)
            rows.append({"country": country, "status": "error", "train_mape": None, "test_mape": None,
                         "band": None, "mean_future": None, "error": str(exc)})
            continue
        bundles.append(bundle)
        mean_future = float(np.mean([p for _, p in bundle.future])) if bundle.future else None
        rows.append({"country": country, "status": "ok", "train_mape": bundle.report.train_mape,
                     "test_mape": bundle.report.test_mape, "band": bundle.report.band.value,
                     "mean_future": mean_future, "error": ""})
    if emit:
        Path(config.output_dir).mkdir(parents=True, exist_ok=True)
        _write_csv(Path(config.output_dir) / "summary.csv", SUMMARY_HEADER,
                   [[r["country"], r["status"], _num(r["train_mape"]), _num(r["test_mape"]),
                     r["band"] or "", _num(r["mean_future"]), r["error"]] for r in rows])
    return rows, bundles
