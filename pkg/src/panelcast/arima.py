"""Small-sample ARIMA(p, d, q) fitting and predictor path simulation.

ARMA coefficients are estimated with the two-stage Hannan-Rissanen least
squares procedure: a long autoregression supplies innovation estimates, then
the series is regressed on its own lags and the lagged innovations. Orders are
capped at 2, which is all ~30 annual observations can support.

The fitted recursion on the d-times differenced series ``w`` is::

    w[t] = c + sum_i ar[i] * w[t-1-i] + sum_j ma[j] * e[t-1-j] + e[t]
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

MAX_ORDER = 2


class ArimaError(ValueError):
    pass


class FitError(ArimaError):
    pass


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        for name in ("p", "d", "q"):
            v = getattr(self, name)
            if not 0 <= v <= MAX_ORDER:
                raise ArimaError(f"{name}={v} outside [0, {MAX_ORDER}]")


@dataclass(frozen=True)
class ArimaModel:
    order: ArimaOrder
    ar_coeffs: tuple[float, ...]
    ma_coeffs: tuple[float, ...]
    intercept: float
    sigma2: float
    aic: float
    fallback: bool = False

    def __post_init__(self):
        if len(self.ar_coeffs) != self.order.p or len(self.ma_coeffs) != self.order.q:
            raise ArimaError("coefficient lengths do not match the model order")
        if self.sigma2 < 0:
            raise ArimaError("sigma2 must be non-negative")

    @property
    def mean(self) -> float:
        """Process mean of the differenced series (nan for a unit AR root)."""
        denom = 1.0 - sum(self.ar_coeffs)
        return self.intercept / denom if denom != 0 else math.nan


def difference(series: Sequence[float], d: int) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if d < 0:
        raise ArimaError("d must be non-negative")
    if d >= len(x):
        raise ArimaError(f"cannot difference {len(x)} points {d} times")
    return np.diff(x, n=d) if d else x.copy()


def undifference(diffs: Sequence[float], history: Sequence[float], d: int) -> np.ndarray:
    """Integrate ``diffs`` (the d-th differences following ``history``) back to levels.

    ``history`` supplies at least ``d`` observed levels immediately before the
    new values; the return holds only the continuation.
    """
    out = np.asarray(diffs, dtype=float)
    if d == 0:
        return out.copy()
    hist = np.asarray(history, dtype=float)
    if len(hist) < d:
        raise ArimaError(f"undifferencing order {d} needs {d} history values")
    # last value of each intermediate differencing level, from the (d-1)-th down to levels
    for level in range(d - 1, -1, -1):
        anchor = np.diff(hist, n=level)[-1] if level else hist[-1]
        out = anchor + np.cumsum(out)
    return out


def lag1_autocorr(x: np.ndarray) -> float:
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0:
        return 0.0
    return float(xc[:-1] @ xc[1:]) / denom


def select_d(series: Sequence[float], threshold: float = 0.5) -> int:
    """Smallest d whose differenced series has lag-1 autocorrelation below ``threshold``.

    If no d in 0..2 qualifies, the d with the smallest differenced variance wins.
    A constant (differenced) series counts as uncorrelated.
    """
    x = np.asarray(series, dtype=float)
    if len(x) < 6:
        raise ArimaError("select_d needs at least 6 observations")
    variances = []
    for d in range(MAX_ORDER + 1):
        w = difference(x, d)
        if lag1_autocorr(w) < threshold:
            return d
        variances.append(w.var(ddof=1))
    return int(np.argmin(variances))


def _lag_matrix(x: np.ndarray, lags: int, start: int) -> np.ndarray:
    """Columns x[t-1], ..., x[t-lags] for t = start .. len(x)-1."""
    return np.column_stack([x[start - k: len(x) - k] for k in range(1, lags + 1)]) if lags else \
        np.empty((len(x) - start, 0))


def _ols(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if design.shape[0] <= design.shape[1]:
        raise FitError(f"{design.shape[0]} observations for {design.shape[1]} regressors")
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise FitError("design matrix is rank deficient")
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return beta, y - design @ beta


def long_ar_order(n: int, p: int, q: int) -> int:
    return max(2 * max(p, q), min(int(math.log(n) ** 2), n // 4))


def natural_start(n: int, p: int, q: int) -> int:
    """First index usable as a stage-two regression target."""
    return long_ar_order(n, p, q) + q if q else p


def _roots_inside(poly_tail: Sequence[float]) -> bool:
    """True if 1 + c1 z + c2 z^2 + ... has a root on or inside the unit circle."""
    if not any(poly_tail):
        return False
    # reciprocal roots are the roots of z^k + c1 z^(k-1) + ... + ck
    return bool(np.any(np.abs(np.roots([1.0, *poly_tail])) >= 1.0))


def fit_arma(series: Sequence[float], p: int, q: int, start: Optional[int] = None) -> ArimaModel:
    """Hannan-Rissanen ARMA(p, q) with intercept on an already stationary series.

    ``start`` moves the first stage-two regression target later, so that
    candidates of different orders can be scored on the same observations.
    The returned model carries ``d=0``; :func:`auto_fit` sets the real ``d``.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 5 * (p + q + 1):
        raise FitError(f"ARMA({p},{q}) needs at least {5 * (p + q + 1)} observations, got {n}")
    if np.ptp(x) == 0:
        raise FitError("constant series has no estimable dynamics")
    lo = natural_start(n, p, q)
    start = lo if start is None else start
    if start < lo:
        raise FitError(f"ARMA({p},{q}) cannot start before index {lo}")

    innov = np.zeros(n)
    if q > 0:
        m = long_ar_order(n, p, q)
        _, long_resid = _ols(np.column_stack([np.ones(n - m), _lag_matrix(x, m, m)]), x[m:])
        innov[m:] = long_resid
    design = np.column_stack([
        np.ones(n - start),
        _lag_matrix(x, p, start),
        _lag_matrix(innov, q, start),
    ])
    beta, resid = _ols(design, x[start:])
    sigma2 = float(resid @ resid) / len(resid)
    if not sigma2 > 0:
        raise FitError("residual variance is zero")
    ar = tuple(float(b) for b in beta[1:1 + p])
    ma = tuple(float(b) for b in beta[1 + p:])
    if _roots_inside([-c for c in ar]):
        raise FitError(f"AR coefficients {ar} are not stationary")
    if _roots_inside(ma):
        raise FitError(f"MA coefficients {ma} are not invertible")
    aic = len(resid) * math.log(sigma2) + 2 * (p + q + 1)
    return ArimaModel(ArimaOrder(p, 0, q), ar, ma, float(beta[0]), sigma2, aic)


def drift_model(series: Sequence[float]) -> ArimaModel:
    """Random walk with drift, the fallback when no ARMA candidate fits."""
    diffs = np.diff(np.asarray(series, dtype=float))
    sigma2 = float(diffs.var()) if len(diffs) else 0.0
    return ArimaModel(ArimaOrder(0, 1, 0), (), (), float(diffs.mean()), sigma2, math.nan, fallback=True)


def auto_fit(series: Sequence[float]) -> ArimaModel:
    x = np.asarray(series, dtype=float)
    if len(x) < 10:
        raise ArimaError("auto_fit needs at least 10 observations")
    d = select_d(x)
    w = difference(x, d)
    n = len(w)
    orders = [(p, q) for p in range(MAX_ORDER + 1) for q in range(MAX_ORDER + 1)
              if n >= 5 * (p + q + 1)]
    # score every candidate on the same observations so AIC values compare
    start = max((natural_start(n, p, q) for p, q in orders), default=0)
    best: Optional[tuple] = None
    for p, q in orders:
        try:
            model = fit_arma(w, p, q, start)
        except FitError:
            continue
        key = (model.aic, p + q, p)
        if best is None or key < best[0]:
            best = (key, model)
    if best is None:
        return drift_model(x)
    m = best[1]
    # final estimates use every observation the chosen order allows
    try:
        m = fit_arma(w, m.order.p, m.order.q)
    except FitError:
        pass
    return ArimaModel(ArimaOrder(m.order.p, d, m.order.q), m.ar_coeffs, m.ma_coeffs,
                      m.intercept, m.sigma2, m.aic)


def innovations(model: ArimaModel, w: np.ndarray) -> np.ndarray:
    """One-step residuals of the ARMA recursion over the differenced history.

    Terms that would reach before the start of the series are taken as zero.
    """
    p, q = model.order.p, model.order.q
    e = np.zeros(len(w))
    for t in range(len(w)):
        pred = model.intercept
        for i in range(p):
            if t - 1 - i >= 0:
                pred += model.ar_coeffs[i] * w[t - 1 - i]
        for j in range(q):
            if t - 1 - j >= 0:
                pred += model.ma_coeffs[j] * e[t - 1 - j]
        e[t] = w[t] - pred
    return e


def forecast(model: ArimaModel, history: Sequence[float], horizon: int,
             rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Mean-path forecast of the next ``horizon`` levels.

    With ``rng`` the future innovations are drawn from N(0, sigma2) instead of
    being set to zero, giving one simulated scenario path.
    """
    if horizon < 1:
        raise ArimaError("horizon must be >= 1")
    x = np.asarray(history, dtype=float)
    d, p, q = model.order.d, model.order.p, model.order.q
    if len(x) <= d:
        raise ArimaError(f"history of {len(x)} points is too short for d={d}")
    w = list(difference(x, d))
    e = list(innovations(model, np.asarray(w))) if q else [0.0] * len(w)
    shocks = (rng.normal(0.0, math.sqrt(model.sigma2), horizon) if rng is not None
              else np.zeros(horizon))
    out = []
    for h in range(horizon):
        val = model.intercept
        for i in range(p):
            k = len(w) - 1 - i
            val += model.ar_coeffs[i] * (w[k] if k >= 0 else 0.0)
        for j in range(q):
            k = len(e) - 1 - j
            val += model.ma_coeffs[j] * (e[k] if k >= 0 else 0.0)
        val += shocks[h]
        w.append(val)
        e.append(shocks[h])
        out.append(val)
    return undifference(out, x, d)


def write_models_csv(models: dict, path) -> None:
    """Export fitted models, one row per indicator id."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["indicator_id", "p", "d", "q", "ar_coeffs", "ma_coeffs",
                         "intercept", "sigma2", "aic", "fallback"])
        for key in sorted(models):
            m = models[key]
            writer.writerow([
                key, m.order.p, m.order.d, m.order.q,
                " ".join(repr(c) for c in m.ar_coeffs),
                " ".join(repr(c) for c in m.ma_coeffs),
                repr(m.intercept), repr(m.sigma2), repr(m.aic), int(m.fallback),
            ])


def read_models_csv(path) -> dict:
    models = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            models[r["indicator_id"]] = ArimaModel(
                ArimaOrder(int(r["p"]), int(r["d"]), int(r["q"])),
                tuple(float(c) for c in r["ar_coeffs"].split()),
                tuple(float(c) for c in r["ma_coeffs"].split()),
                float(r["intercept"]), float(r["sigma2"]), float(r["aic"]),
                bool(int(r["fallback"])),
            )
    return models
