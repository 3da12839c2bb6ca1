import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etasbayes.catalog import (Catalog, CatalogFormatError, Event, TimeDomain,
                               load_catalog, save_catalog, split_domain,
                               validate)


def test_construction_sorts_by_time():
    cat = Catalog([0.5, 0.2], [3.0, 2.6])
    assert list(cat.times) == [0.2, 0.5]
    assert list(cat.mags) == [2.6, 3.0]


def test_tie_break_magnitude_descending():
    # a mainshock must precede same-time aftershocks
    cat = Catalog([5.0, 5.0, 5.0], [3.0, 6.7, 4.0], [10, 11, 12])
    assert list(cat.mags) == [6.7, 4.0, 3.0]
    assert list(cat.ids) == [11, 12, 10]


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        Catalog([math.nan], [3.0])
    with pytest.raises(ValueError):
        Catalog([0.0], [math.inf])


def test_rejects_duplicate_ids():
    with pytest.raises(ValueError):
        Catalog([0.0, 1.0], [3.0, 3.0], [7, 7])


def test_catalog_arrays_immutable():
    cat = Catalog([0.1], [3.0])
    with pytest.raises(ValueError):
        cat.times[0] = 2.0


def test_load_catalog_sorts(tmp_path):
    p = tmp_path / "cat.csv"
    p.write_text("time,magnitude\n0.5,3.0\n0.2,2.6\n")
    cat = load_catalog(p)
    assert [(e.time, e.magnitude) for e in cat] == [(0.2, 2.6), (0.5, 3.0)]


def test_load_catalog_empty(tmp_path):
    p = tmp_path / "cat.csv"
    p.write_text("time,magnitude\n")
    assert len(load_catalog(p)) == 0


def test_load_catalog_malformed_row_reports_line(tmp_path):
    p = tmp_path / "cat.csv"
    p.write_text("time,magnitude\n1.0,3.0\nabc,3.0\n")
    with pytest.raises(CatalogFormatError, match="line 3"):
        load_catalog(p)


def test_load_catalog_missing_file():
    with pytest.raises(CatalogFormatError):
        load_catalog("/nonexistent/never.csv")


def test_load_catalog_non_finite_rejected(tmp_path):
    p = tmp_path / "cat.csv"
    p.write_text("time,magnitude\ninf,3.0\n")
    with pytest.raises(CatalogFormatError, match="line 2"):
        load_catalog(p)


def test_round_trip_preserves_values(tmp_path):
    rng = np.random.default_rng(0)
    times = rng.uniform(0, 1000, 100)
    mags = 2.5 + rng.exponential(0.4, 100)
    cat = Catalog(times, mags)
    p = tmp_path / "cat.csv"
    save_catalog(cat, p)
    back = load_catalog(p)
    np.testing.assert_allclose(back.times, cat.times, rtol=1e-12)
    np.testing.assert_allclose(back.mags, cat.mags, rtol=1e-12)
    assert list(back.ids) == list(cat.ids)


def test_json_round_trip():
    cat = Catalog([1.0, 2.0], [3.0, 4.0], [5, 6])
    back = Catalog.from_json(cat.to_json())
    np.testing.assert_array_equal(back.times, cat.times)
    np.testing.assert_array_equal(back.ids, cat.ids)


class TestSplitDomain:
    dom = TimeDomain(500.0, 1000.0, 2.5)

    def test_partition_example(self):
        cat = Catalog([100.0, 501.0, 999.0], [3.0, 3.0, 3.0])
        hist, mod = split_domain(cat, self.dom)
        assert list(hist.times) == [100.0]
        assert list(mod.times) == [501.0, 999.0]

    def test_all_inside(self):
        cat = Catalog([1.0, 999.0], [3.0, 3.0])
        hist, mod = split_domain(cat, TimeDomain(0.0, 1000.0, 2.5))
        assert len(hist) == 0 and len(mod) == 2

    def test_boundaries_inclusive(self):
        cat = Catalog([500.0, 1000.0], [3.0, 3.0])
        hist, mod = split_domain(cat, self.dom)
        assert len(hist) == 0
        assert list(mod.times) == [500.0, 1000.0]

    def test_below_m0_dropped(self):
        cat = Catalog([600.0, 700.0], [2.0, 3.0])
        hist, mod = split_domain(cat, self.dom)
        assert list(mod.mags) == [3.0]

    @given(st.lists(st.tuples(st.floats(-100, 1200), st.floats(2.5, 8.0)),
                    max_size=60))
    @settings(max_examples=50, deadline=None)
    def test_partition_property(self, rows):
        cat = Catalog([t for t, _ in rows], [m for _, m in rows])
        hist, mod = split_domain(cat, self.dom)
        hist_ids, mod_ids = set(hist.ids), set(mod.ids)
        assert not hist_ids & mod_ids
        discarded = set(cat.ids) - hist_ids - mod_ids
        for i in discarded:
            k = list(cat.ids).index(i)
            assert cat.times[k] > self.dom.t2 or cat.mags[k] < self.dom.m0


def test_validate_counts():
    dom = TimeDomain(0.0, 1000.0, 2.5)
    cat = Catalog([1.0, 1.0, 5.0], [3.0, 2.0, 4.0])
    rep = validate(cat, dom)
    assert rep.n_events == 3
    assert rep.n_below_m0 == 1
    assert rep.n_duplicate_times == 1
    assert rep.t_min == 1.0 and rep.t_max == 5.0
    assert rep.mag_min == 2.0 and rep.mag_max == 4.0


def test_validate_empty():
    rep = validate(Catalog([], []), TimeDomain(0.0, 1.0, 2.5))
    assert rep.n_events == 0
    assert rep.n_below_m0 == 0 and rep.n_duplicate_times == 0


def test_time_domain_invalid():
    with pytest.raises(ValueError):
        TimeDomain(5.0, 5.0, 2.5)
    with pytest.raises(ValueError):
        TimeDomain(0.0, 1.0, math.nan)
