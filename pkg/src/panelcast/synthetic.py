"""Synthetic country-indicator panels with a known set of true drivers.

Used by the demo command and the end-to-end tests. Each country gets a latent
mean-reverting AR(1) factor, as a bounded governance index would have; the
true drivers are noisy, rescaled copies of it, the distractors are a mix of
independent AR(1) paths and drifting random walks, and the target
is a sparse linear plus mildly nonlinear function of the drivers with noise at
a chosen signal-to-noise ratio, squeezed into the [-2.5, 2.5] index range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import RawRow, RawTable

TARGET_CODE = "PV.EST"
TARGET_NAME = "Political Stability and Absence of Violence/Terrorism: Estimate"
COUNTRIES = ("Saudi Arabia", "United Arab Emirates", "Kuwait", "Qatar", "Oman", "Bahrain")


@dataclass(frozen=True)
class SyntheticPanel:
    table: RawTable
    true_drivers: dict


FACTOR_PERSISTENCE = 0.8


def _ar1(rng, n, phi):
    x = np.empty(n)
    x[0] = rng.normal(0.0, 1.0 / np.sqrt(1 - phi * phi))
    for t in range(1, n):
        x[t] = phi * x[t - 1] + rng.normal()
    return x


def _z(x):
    return (x - x.mean()) / x.std()


def make_country(rng: np.random.Generator, n_years: int, n_predictors: int, n_true: int,
                 snr: float) -> tuple[np.ndarray, np.ndarray, list[int]]:
    factor = _ar1(rng, n_years, FACTOR_PERSISTENCE)
    X = np.empty((n_years, n_predictors))
    true_idx = sorted(rng.choice(n_predictors, n_true, replace=False).tolist())
    for j in range(n_predictors):
        if j in true_idx:
            series = factor + 0.25 * _ar1(rng, n_years, FACTOR_PERSISTENCE)
        elif j % 2:
            series = _ar1(rng, n_years, FACTOR_PERSISTENCE)
        else:
            series = np.cumsum(rng.normal(rng.normal(0.0, 0.5), 1.0, n_years))
        X[:, j] = series

    Z = np.column_stack([_z(X[:, j]) for j in true_idx])
    weights = rng.uniform(0.5, 1.5, n_true)
    signal = Z @ weights / weights.sum() + 0.2 * np.tanh(Z[:, 0] * Z[:, 1])
    noise = rng.normal(0.0, np.sqrt(signal.var() / snr), n_years)
    amplitude = rng.uniform(0.3, 0.6)
    level = rng.uniform(-0.8, 0.8)
    target = np.clip(level + amplitude * _z(signal + noise), -2.5, 2.5)

    # put predictors on wildly different scales, as raw indicators are
    scales = 10.0 ** rng.uniform(-1, 10, n_predictors)
    shifts = rng.uniform(0, 5, n_predictors) * scales * 10
    X = X * scales + shifts
    return X, target, true_idx


def make_synthetic_panel(n_countries: int = 6, n_predictors: int = 40, n_true: int = 5,
                         years: tuple[int, int] = (1996, 2023), snr: float = 10.0,
                         seed: int = 0) -> SyntheticPanel:
    rng = np.random.default_rng(seed)
    year_list = tuple(range(years[0], years[1] + 1))
    rows = []
    truth = {}
    for c in range(n_countries):
        country = COUNTRIES[c] if c < len(COUNTRIES) else f"Country {c + 1}"
        X, target, true_idx = make_country(rng, len(year_list), n_predictors, n_true, snr)
        truth[country] = [f"IND.{j:03d}" for j in true_idx]
        rows.append(RawRow(country, TARGET_NAME, TARGET_CODE,
                           {y: float(v) for y, v in zip(year_list, target)}))
        for j in range(n_predictors):
            rows.append(RawRow(country, f"Synthetic indicator {j}", f"IND.{j:03d}",
                               {y: float(v) for y, v in zip(year_list, X[:, j])}))
    return SyntheticPanel(RawTable(year_list, tuple(rows)), truth)
