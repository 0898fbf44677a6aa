from pathlib import Path

import pytest

from panelcast.config import DEFAULT_GRID, GRID_ALIASES, TYPICAL_GRID, ConfigError, config_from_mapping, load_config
from panelcast.gbtree import PARAM_ORDER

MINIMAL = 'data_path = "data.csv"\ncountries = ["Oman"]\ntarget_code = "PV.EST"\n'


def write(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_minimal_defaults(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL))
    assert cfg.data_path == tmp_path / "data.csv"
    assert cfg.countries == ("Oman",)
    assert cfg.horizon == 5
    assert cfg.edr.epsilon == 0.25 and cfg.edr.k == 10
    assert cfg.mape_offset == 3.0
    assert cfg.split.train_years == (1996, 2018) and cfg.split.test_years == (2019, 2023)
    assert (cfg.cv.min_train_size, cfg.cv.fold_horizon) == (15, 2)
    assert dict(cfg.grid) == {k: tuple(v) for k, v in DEFAULT_GRID.items()}


def test_full_config(tmp_path):
    text = MINIMAL + (
        "horizon = 3\nseed = 7\nmape_offset = 4\noutput_dir = \"out\"\n"
        "train_years = [2000, 2015]\ntest_years = [2016, 2020]\n"
        "edr.epsilon = 0.5\nedr.k = 4\n"
        "[grid]\nmax_depth = [2, 4]\nlambda = [0, 1]\n"
    )
    cfg = load_config(write(tmp_path, text))
    assert cfg.horizon == 3 and cfg.seed == 7 and cfg.mape_offset == 4.0
    assert cfg.output_dir == tmp_path / "out"
    assert cfg.edr.k == 4
    assert dict(cfg.grid) == {"max_depth": (2, 4), "reg_lambda": (0, 1)}


@pytest.mark.parametrize("extra,fragment", [
    ("horizon = 0\n", "horizon"),
    ("train_years = [1996, 2019]\ntest_years = [2019, 2023]\n", "train"),
    ("test_years = [2020, 2023]\n", "right after"),
    ("year_range = [2000, 2023]\n", "outside"),
    ("bogus = 1\n", "bogus"),
    ("grid.depth = [1]\n", "grid.depth"),
    ("edr.k = 0\n", "k"),
    ('horizon = "5"\n', "horizon"),
])
def test_invalid(tmp_path, extra, fragment):
    with pytest.raises(ConfigError, match=fragment):
        load_config(write(tmp_path, MINIMAL + extra))


def test_empty_country_list():
    with pytest.raises(ConfigError, match="countries"):
        config_from_mapping({"data_path": "x.csv", "countries": [], "target_code": "T"})


def test_missing_required():
    with pytest.raises(ConfigError, match="target_code"):
        config_from_mapping({"data_path": "x.csv", "countries": ["Oman"]})


def test_unreadable_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "countries = [\n"))


def test_grids_use_known_parameters():
    for grid in (DEFAULT_GRID, TYPICAL_GRID):
        assert set(grid) <= set(PARAM_ORDER)
    for k, values in DEFAULT_GRID.items():
        assert set(values) <= set(TYPICAL_GRID[k])
    assert set(GRID_ALIASES.values()) <= set(PARAM_ORDER)
    assert list(TYPICAL_GRID) == list(PARAM_ORDER)


def test_relative_paths_resolve_against_config_dir(tmp_path):
    sub = tmp_path / "cfg"
    sub.mkdir()
    cfg = load_config(write(sub, MINIMAL.replace("data.csv", "../d/data.csv")))
    assert cfg.data_path == sub / Path("../d/data.csv")
