import collections
import logging
import math
from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from glyforecast.errors import DataError, InsufficientDataError, NoPairsError
from glyforecast.series import (GlucoseReading, UniformSeries, Window, horizon_to_steps, ingest_readings,
                                lag_embed, lag_pairs, load_series, read_readings_csv, resample,
                                segment_readings, slide, window_capacity, write_series_csv)

from conftest import T0, make_series, make_window


def readings(pairs):
    return [GlucoseReading(T0 + timedelta(minutes=m), v) for m, v in pairs]


class TestGlucoseReading:
    @pytest.mark.parametrize("value", [0.0, -5.0, 1000.0, 1500.0, math.nan, math.inf])
    def test_rejects_out_of_range(self, value):
        with pytest.raises(DataError):
            GlucoseReading(T0, value)

    def test_accepts_open_interval(self):
        assert GlucoseReading(T0, 0.5).value == 0.5
        assert GlucoseReading(T0, 999.9).value == 999.9


class TestIngest:
    def test_already_uniform(self):
        s = ingest_readings(readings([(0, 100), (5, 105), (10, 110)]), min_hours=0)
        np.testing.assert_array_equal(s.values, [100, 105, 110])
        assert s.interval_minutes == 5
        assert s.start == T0

    def test_interpolates_single_missing(self):
        s = ingest_readings(readings([(0, 100), (10, 110)]), min_hours=0)
        np.testing.assert_array_equal(s.values, [100, 105, 110])

    def test_two_missing_still_interpolated(self):
        s = ingest_readings(readings([(0, 100), (15, 130)]), min_hours=0)
        np.testing.assert_allclose(s.values, [100, 110, 120, 130])

    def test_unsorted_input(self):
        s = ingest_readings(readings([(10, 110), (0, 100), (5, 105)]), min_hours=0)
        np.testing.assert_array_equal(s.values, [100, 105, 110])

    def test_long_gap_keeps_longest_segment(self, caplog):
        first = [(5 * i, 100 + i) for i in range(10)]          # 0..45 min
        second = [(45 + 60 + 5 * i, 200 + i) for i in range(20)]  # after a 60-min gap
        raw = readings(first + second)
        seg = segment_readings(raw)
        assert [len(s.series) for s in seg.segments] == [10, 20]
        assert len(seg.gaps) == 1
        gap = seg.gaps[0]
        assert gap.start == T0 + timedelta(minutes=50)
        assert gap.end == T0 + timedelta(minutes=105)
        with caplog.at_level(logging.WARNING):
            s = ingest_readings(raw, min_hours=0)
        np.testing.assert_array_equal(s.values, [200 + i for i in range(20)])
        assert s.start == T0 + timedelta(minutes=105)
        assert "gap" in caplog.text

    def test_empty(self):
        with pytest.raises(DataError):
            ingest_readings([])

    def test_short_segments_insufficient(self):
        raw = readings([(5 * i, 100.0) for i in range(30)])  # 2.5 h
        with pytest.raises(InsufficientDataError) as info:
            ingest_readings(raw)
        assert info.value.required == 36
        assert info.value.available == 30


class TestResample:
    def test_identity(self):
        s = make_series([1, 2, 3])
        assert resample(s, 5) == s

    def test_every_third(self):
        s = make_series(list("1234567"))
        np.testing.assert_array_equal(resample(s, 15).values, [1, 4, 7])

    def test_length_72_to_36(self):
        assert len(resample(make_series(np.arange(1, 73)), 10)) == len(range(0, 72, 2)) == 36

    def test_non_multiple(self):
        with pytest.raises(DataError):
            resample(make_series([1, 2, 3]), 7)

    @given(st.integers(1, 200), st.integers(1, 6))
    def test_decimation_property(self, n, k):
        s = make_series(np.arange(1, n + 1, dtype=float))
        r = resample(s, 5 * k)
        assert len(r) == math.ceil(n / k)
        for j in range(len(r)):
            assert r.values[j] == s.values[j * k]
            assert r.timestamp_at(j) == s.timestamp_at(j * k)


class TestWindow:
    def test_capacity(self):
        assert window_capacity(6, 5) == 72
        assert window_capacity(6, 15) == 24
        assert window_capacity(36, 5) == 432
        with pytest.raises(DataError):
            window_capacity(0.1, 15)

    def test_slide_basic(self):
        w = make_window([1, 2, 3])
        w2 = slide(w, 4)
        np.testing.assert_array_equal(w2.values, [2, 3, 4])
        assert w2.series.start == w.series.start + timedelta(minutes=5)
        np.testing.assert_array_equal(w.values, [1, 2, 3])  # original untouched

    def test_constant_fixed_point(self):
        w = make_window([7.0, 7.0, 7.0])
        np.testing.assert_array_equal(slide(w, 7.0).values, w.values)

    def test_nonfinite_rejected(self):
        with pytest.raises(DataError):
            slide(make_window([1, 2, 3]), math.nan)

    def test_cold_window_rejected(self):
        s = make_series([1.0, 2.0])
        with pytest.raises(DataError):
            slide(Window(s, 1.0), 3.0)

    def test_ten_slides_against_queue(self):
        base = np.arange(100, 182, dtype=float)
        w = Window.from_series(make_series(base), 6, end=72)
        q = collections.deque(base[:72], maxlen=72)
        for v in base[72:82]:
            w = slide(w, v)
            q.append(v)
        assert len(w) == 72
        assert w.values[0] == base[10]
        np.testing.assert_array_equal(w.values, list(q))

    @given(st.lists(st.floats(1, 999), min_size=1, max_size=12),
           st.lists(st.floats(1, 999), max_size=40))
    def test_slide_matches_queue(self, init, updates):
        w = make_window(init)
        q = collections.deque(init, maxlen=len(init))
        start = w.series.start
        for v in updates:
            w = slide(w, v)
            q.append(v)
            assert len(w) == len(init)
            np.testing.assert_array_equal(w.values, list(q))
        assert w.series.start == start + timedelta(minutes=5 * len(updates))
        stamps = w.series.timestamps()
        assert all(a < b for a, b in zip(stamps, stamps[1:]))


class TestLagEmbed:
    def test_enumeration(self):
        ds = lag_embed(make_window([1, 2, 3, 4, 5]), 2, 1)
        np.testing.assert_array_equal(ds.features, [[1, 2], [2, 3], [3, 4]])
        np.testing.assert_array_equal(ds.targets, [3, 4, 5])

    def test_boundary_no_pairs(self):
        with pytest.raises(NoPairsError):
            lag_embed(make_window([1.0, 2.0, 3.0, 4.0]), 2, 3)

    def test_72_12_3(self):
        ds = lag_embed(make_window(np.arange(72.0) + 1), 12, 3)
        assert len(ds) == 58

    @staticmethod
    def brute_force(values, m, h):
        pairs = []
        for i in range(len(values)):
            j = i + m + h - 1
            if j < len(values):
                pairs.append((list(values[i:i + m]), values[j]))
        return pairs

    def test_counting_exhaustive(self):
        # every (n, m, h) with n <= 64
        for n in range(1, 65):
            vals = np.arange(n, dtype=float)
            for m in range(1, n + 2):
                for h in range(1, n + 2):
                    X, y = lag_pairs(vals, m, h)
                    expected = self.brute_force(list(vals), m, h)
                    assert len(y) == max(n - m - h + 1, 0) == len(expected)
                    if expected and (n + m + h) % 7 == 0:
                        assert [list(r) for r in X] == [p[0] for p in expected]
                        assert list(y) == [p[1] for p in expected]


class TestHorizon:
    @pytest.mark.parametrize("ph,sf,expected", [
        (15, 5, (3, 15)), (60, 15, (4, 60)), (15, 10, (2, 20)), (45, 10, (5, 50)), (30, 10, (3, 30))])
    def test_examples(self, ph, sf, expected):
        assert horizon_to_steps(ph, sf) == expected

    def test_too_short(self):
        with pytest.raises(DataError):
            horizon_to_steps(5, 10)

    @given(st.integers(1, 30), st.integers(1, 240))
    def test_within_half_interval(self, sf, extra):
        ph = sf + extra
        steps, eff = horizon_to_steps(ph, sf)
        assert eff == steps * sf
        assert abs(eff - ph) <= sf / 2


class TestCsv:
    def test_round_trip(self, tmp_path):
        s = make_series([100.5, 101.25, 99.0, 120.0] * 10)
        path = tmp_path / "p.csv"
        write_series_csv(s, path)
        assert path.read_text().splitlines()[0] == "timestamp,glucose_mg_dl"
        assert path.read_text().splitlines()[1].startswith("2024-01-01T00:00:00Z,")
        back = ingest_readings(read_readings_csv(path), min_hours=0)
        assert back == s

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_readings_csv(tmp_path / "nope.csv")

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,value\n2024-01-01T00:00:00Z,100\n")
        with pytest.raises(DataError):
            read_readings_csv(p)

    def test_deterministic(self, tmp_path):
        p = tmp_path / "p.csv"
        rows = ["timestamp,glucose_mg_dl"] + [
            f"2024-01-01T{h:02d}:{m:02d}:00Z,{100 + h + m / 10}" for h in range(4) for m in range(0, 60, 5)]
        p.write_text("\n".join(rows) + "\n")
        a, b = load_series(p), load_series(p)
        assert a == b
        assert resample(a, 15) == resample(b, 15)
