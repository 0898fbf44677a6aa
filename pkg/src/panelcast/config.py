"""Run configuration.

Configs are flat TOML: ``key = value`` lines with list values in brackets.
Grouped settings use dotted keys (``edr.k = 10``, ``grid.max_depth = [3, 5]``);
TOML tables (``[grid]``) are equivalent. Relative paths resolve against the
directory holding the config file.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .edr import EdrError, EdrParams
from .evaluation import CvScheme, EvaluationError, SplitSpec
from .gbtree import PARAM_ORDER
from .ingest import DEFAULT_MAX_MISSING


class ConfigError(ValueError):
    pass


# alias -> GbtParams field, so configs can use the hyperparameter table names
GRID_ALIASES = {"lambda": "reg_lambda", "alpha": "reg_alpha"}

# typical value ranges for each hyperparameter
TYPICAL_GRID = {
    "n_estimators": [100, 500, 1000],
    "learning_rate": [0.01, 0.1, 0.3],
    "max_depth": [3, 5, 7, 10],
    "min_child_weight": [1, 3, 5],
    "gamma": [0, 0.1, 0.5, 1],
    "subsample": [0.6, 0.8, 1.0],
    "colsample_bytree": [0.6, 0.8, 1.0],
    "colsample_bylevel": [0.6, 0.8, 1.0],
    "reg_lambda": [0, 1, 5, 10],
    "reg_alpha": [0, 1, 5, 10],
    "scale_pos_weight": [1],
}

# desk-scale subset of the table; every value is drawn from it
DEFAULT_GRID = {
    "n_estimators": [100],
    "learning_rate": [0.1, 0.3],
    "max_depth": [3, 5],
    "subsample": [0.8, 1.0],
    "reg_lambda": [1],
}


@dataclass(frozen=True)
class RunConfig:
    data_path: Path
    countries: tuple[str, ...]
    target_code: str
    year_range: tuple[int, int] = (1996, 2023)
    edr: EdrParams = field(default_factory=EdrParams)
    grid: Mapping[str, tuple] = field(default_factory=lambda: {k: tuple(v) for k, v in DEFAULT_GRID.items()})
    cv: CvScheme = field(default_factory=CvScheme)
    split: SplitSpec = field(default_factory=SplitSpec)
    horizon: int = 5
    mape_offset: float = 3.0
    max_missing_fraction: float = DEFAULT_MAX_MISSING
    output_dir: Path = Path("panelcast-out")
    seed: int = 0

    def __post_init__(self):
        if not str(self.data_path):
            raise ConfigError("data_path must be non-empty")
        if not str(self.output_dir):
            raise ConfigError("output_dir must be non-empty")
        if not self.countries:
            raise ConfigError("countries must list at least one country")
        if not self.target_code:
            raise ConfigError("target_code must be non-empty")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        lo, hi = self.year_range
        if lo > hi:
            raise ConfigError(f"year_range {self.year_range} is reversed")
        (a, b), (c, d) = self.split.train_years, self.split.test_years
        if a < lo or d > hi:
            raise ConfigError(f"split {a}-{d} falls outside year_range {lo}-{hi}")
        if c != b + 1:
            raise ConfigError(f"test years must start right after training ends ({b + 1}), got {c}")
        if not 0 <= self.max_missing_fraction < 1:
            raise ConfigError("max_missing_fraction must be in [0, 1)")


_SCALARS = {
    "data_path": str,
    "countries": list,
    "target_code": str,
    "year_range": list,
    "train_years": list,
    "test_years": list,
    "horizon": int,
    "mape_offset": float,
    "max_missing_fraction": float,
    "output_dir": str,
    "seed": int,
    "edr.epsilon": float,
    "edr.k": int,
    "cv.min_train_size": int,
    "cv.fold_horizon": int,
}


def _flatten(data: Mapping[str, Any], prefix: str = "") -> dict:
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def _pair(name, value) -> tuple[int, int]:
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, int) for v in value)):
        raise ConfigError(f"{name} must be a [start, end] pair of years")
    return value[0], value[1]


def config_from_mapping(data: Mapping[str, Any], base_dir: Path = Path(".")) -> RunConfig:
    flat = _flatten(data)
    grid: dict[str, tuple] = {}
    kwargs: dict[str, Any] = {}
    for key, value in flat.items():
        if key.startswith("grid."):
            pname = key[5:]
            pname = GRID_ALIASES.get(pname, pname)
            if pname not in PARAM_ORDER:
                raise ConfigError(f"unknown key {key!r}")
            values = value if isinstance(value, list) else [value]
            if not values:
                raise ConfigError(f"{key} has no values")
            grid[pname] = tuple(values)
            continue
        if key not in _SCALARS:
            raise ConfigError(f"unknown key {key!r}")
        kind = _SCALARS[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or isinstance(value, bool):
            raise ConfigError(f"{key} must be of type {kind.__name__}")
        kwargs[key] = value

    for required in ("data_path", "countries", "target_code"):
        if required not in kwargs:
            raise ConfigError(f"missing required key {required!r}")

    try:
        split = SplitSpec(
            _pair("train_years", kwargs.pop("train_years", [1996, 2018])),
            _pair("test_years", kwargs.pop("test_years", [2019, 2023])),
        )
        edr = EdrParams(kwargs.pop("edr.epsilon", 0.25), kwargs.pop("edr.k", 10))
        cv = CvScheme(kwargs.pop("cv.min_train_size", 15), kwargs.pop("cv.fold_horizon", 2))
    except (EvaluationError, EdrError) as exc:
        raise ConfigError(str(exc)) from exc

    if "year_range" in kwargs:
        kwargs["year_range"] = _pair("year_range", kwargs["year_range"])
    countries = kwargs.pop("countries")
    if not all(isinstance(c, str) for c in countries):
        raise ConfigError("countries must be a list of names")
    data_path = base_dir / kwargs.pop("data_path")
    output_dir = base_dir / kwargs.pop("output_dir", "panelcast-out")
    return RunConfig(
        data_path=data_path,
        countries=tuple(countries),
        edr=edr,
        cv=cv,
        split=split,
        output_dir=output_dir,
        grid=grid or {k: tuple(v) for k, v in DEFAULT_GRID.items()},
        **kwargs,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_mapping(data, path.parent)
