import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import edr_by_alignment, edr_recursive
from panelcast.edr import (
    EdrError,
    EdrParams,
    EmptyPanelError,
    FeatureRanking,
    RankEntry,
    SelectionError,
    edr_distance,
    rank_predictors,
    read_ranking_csv,
    select_top_k,
    write_ranking_csv,
)
from panelcast.ingest import IndicatorPanel, TimeSeries


def panel_of(target, predictors, years=None):
    years = tuple(years or range(2000, 2000 + len(target)))
    return IndicatorPanel(
        "Oman",
        TimeSeries("T", years, np.asarray(target, dtype=float)),
        {k: TimeSeries(k, years, np.asarray(v, dtype=float)) for k, v in predictors.items()},
    )


class TestDistance:
    def test_examples(self):
        assert edr_distance([1, 2, 3], [1, 2, 3], 0.25) == 0
        assert edr_distance([], [5.0, 6.0], 0.25) == 2
        assert edr_distance([0, 0, 0], [1, 1, 1], 0.25) == 3
        assert edr_by_alignment([0, 0, 0], [1, 1, 1], 0.25) == 3

    def test_tolerance_is_inclusive(self):
        assert edr_distance([0.0], [0.25], 0.25) == 0
        assert edr_distance([0.0], [0.2500001], 0.25) == 1

    def test_shift_costs_an_insert_and_a_delete(self):
        assert edr_distance([1, 2, 3, 4], [2, 3, 4, 5], 0.1) == 2

    @pytest.mark.parametrize("eps", [0, -1.0])
    def test_bad_epsilon(self, eps):
        with pytest.raises(EdrError):
            edr_distance([1], [1], eps)

    def test_matches_alignment_enumeration_small(self):
        alphabet = (0.0, 0.1, 1.0)
        seqs = [s for n in range(4) for s in itertools.product(alphabet, repeat=n)]
        for a in seqs:
            for b in seqs:
                assert edr_distance(a, b, 0.25) == edr_by_alignment(a, b, 0.25), (a, b)


seqs = st.lists(st.floats(-3, 3), max_size=50)


@settings(max_examples=150, deadline=None)
@given(seqs, seqs, st.floats(0.01, 1.0))
def test_symmetry_and_bounds(a, b, eps):
    d = edr_distance(a, b, eps)
    assert d == edr_distance(b, a, eps)
    assert max(len(a), len(b)) - min(len(a), len(b)) <= d <= len(a) + len(b)
    assert edr_distance(a, a, eps) == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-2, 2), max_size=25), st.lists(st.floats(-2, 2), max_size=25))
def test_matches_recursive_oracle(a, b):
    assert edr_distance(a, b, 0.25) == edr_recursive(a, b, 0.25)


class TestRanking:
    def test_identical_predictor_first(self):
        rng = np.random.default_rng(0)
        target = np.cumsum(rng.normal(size=20))
        p = panel_of(target, {"copy": target * 3 + 1, "neg": -target, "noise": rng.normal(size=20)})
        ranking = rank_predictors(p, EdrParams())
        assert ranking.entries[0] == RankEntry("copy", 0, 1.0)
        ids = ranking.ids()
        assert ids.index("copy") < ids.index("neg")

    def test_similarity_and_order(self):
        rng = np.random.default_rng(3)
        target = np.cumsum(rng.normal(size=15))
        p = panel_of(target, {f"P{i}": np.cumsum(rng.normal(size=15)) for i in range(8)})
        ranking = rank_predictors(p, EdrParams())
        keys = [(e.distance, e.indicator_id) for e in ranking.entries]
        assert keys == sorted(keys)
        for e in ranking.entries:
            assert e.similarity == pytest.approx(1 - e.distance / 15)
        assert len(ranking) == 8

    def test_matches_oracle_ranking(self):
        from panelcast.ingest import zscore

        rng = np.random.default_rng(11)
        target = np.cumsum(rng.normal(size=20))
        preds = {f"RW{i}": np.cumsum(rng.normal(size=20)) for i in range(5)}
        ranking = rank_predictors(panel_of(target, preds), EdrParams(0.25, 3))
        zt = zscore(target)
        expected = sorted(preds, key=lambda k: (edr_recursive(zt, zscore(preds[k]), 0.25), k))
        assert ranking.ids() == expected

    def test_affine_invariance(self):
        rng = np.random.default_rng(5)
        target = np.cumsum(rng.normal(size=20))
        preds = {f"P{i}": np.cumsum(rng.normal(size=20)) for i in range(6)}
        scaled = {k: v * 10.0 ** (i + 2) - 7 * i for i, (k, v) in enumerate(preds.items())}
        a = rank_predictors(panel_of(target, preds), EdrParams())
        b = rank_predictors(panel_of(target, scaled), EdrParams())
        assert a.ids() == b.ids()

    def test_empty_panel(self):
        with pytest.raises(EmptyPanelError):
            rank_predictors(panel_of([1, 2, 3], {}), EdrParams())

    def test_params_validated(self):
        with pytest.raises(EdrError):
            EdrParams(epsilon=0)
        with pytest.raises(EdrError):
            EdrParams(k=0)


def make_ranking(n):
    return FeatureRanking(tuple(RankEntry(f"X{i:02d}", i, 1 - i / 20) for i in range(n)))


class TestSelect:
    def test_top_ten_of_twelve(self):
        assert select_top_k(make_ranking(12), 10) == [f"X{i:02d}" for i in range(10)]

    def test_all(self):
        assert select_top_k(make_ranking(4), 4) == ["X00", "X01", "X02", "X03"]

    def test_too_many(self):
        with pytest.raises(SelectionError):
            select_top_k(make_ranking(4), 5)

    def test_tie_broken_by_id(self):
        target = np.arange(6.0)
        p = panel_of(target, {"b": target, "a": target * 2})
        assert select_top_k(rank_predictors(p, EdrParams()), 1) == ["a"]


def test_ranking_csv_roundtrip(tmp_path):
    ranking = make_ranking(5)
    path = tmp_path / "ranking.csv"
    write_ranking_csv(ranking, path)
    assert path.read_text().splitlines()[0] == "indicator_id,distance,similarity,rank"
    assert read_ranking_csv(path) == ranking
