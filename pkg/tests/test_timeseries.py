from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langfit import QuoteRecord, Series, clean_quotes, load_series, monthly_windows, \
    resample_last_quote, write_series
from langfit.errors import EmptyInput, LengthMismatch, ParseError


def quote(minute, bid, ask, day=1):
    return QuoteRecord(timestamp=datetime(2021, 3, day, 10, minute), bid=bid, ask=ask)


quotes_strategy = st.lists(
    st.tuples(st.integers(min_value=0, max_value=59),
              st.floats(min_value=1.0, max_value=100.0),
              st.floats(min_value=0.0, max_value=8.0)),
    max_size=30,
).map(lambda rows: [quote(m, b, b + s) for m, b, s in sorted(rows)])


class TestSeries:
    def test_requires_strictly_increasing_times(self):
        with pytest.raises(ValueError):
            Series(times=[0.0, 0.0, 1.0], values=[1.0, 2.0, 3.0])

    def test_requires_two_points(self):
        with pytest.raises(EmptyInput):
            Series(times=[0.0], values=[1.0])

    def test_requires_finite_values(self):
        with pytest.raises(ValueError):
            Series(times=[0.0, 1.0], values=[1.0, np.nan])


class TestCleanQuotes:
    def test_crossed_quote_removed(self):
        assert clean_quotes([quote(0, 10.0, 9.0)]) == []

    def test_tight_spread_kept(self):
        records = [quote(0, 10.0, 10.01)]
        assert clean_quotes(records) == records

    def test_wide_spread_removed(self):
        assert clean_quotes([quote(0, 10.0, 16.0)], spread_cap=5.0) == []

    def test_spread_at_cap_removed(self):
        assert clean_quotes([quote(0, 10.0, 15.0)], spread_cap=5.0) == []

    @given(records=quotes_strategy)
    def test_idempotent(self, records):
        once = clean_quotes(records)
        assert clean_quotes(once) == once

    def test_preserves_order(self):
        records = [quote(0, 10.0, 10.5), quote(1, 11.0, 10.0), quote(2, 9.0, 9.2)]
        assert clean_quotes(records) == [records[0], records[2]]


class TestResampleLastQuote:
    def test_last_quote_in_bucket_wins(self):
        records = [quote(0, 99.5, 100.5), quote(10, 100.5, 101.5), quote(40, 101.5, 102.5)]
        series = resample_last_quote(records, timedelta(minutes=30))
        np.testing.assert_allclose(series.values, [101.0, 102.0])
        np.testing.assert_allclose(series.times, [0.0, 1.0])

    def test_forward_fill_of_empty_buckets(self):
        records = [quote(0, 100.5, 101.5), quote(5, 100.0, 102.0),
                   QuoteRecord(datetime(2021, 3, 1, 11, 35), 104.0, 106.0)]
        series = resample_last_quote(records, timedelta(minutes=30))
        np.testing.assert_allclose(series.values, [101.0, 101.0, 101.0, 105.0])

    def test_single_bucket_is_degenerate(self):
        with pytest.raises(EmptyInput):
            resample_last_quote([quote(0, 99.0, 101.0)], timedelta(minutes=30))

    def test_no_records(self):
        with pytest.raises(EmptyInput):
            resample_last_quote([], timedelta(minutes=30))

    @given(records=quotes_strategy.filter(lambda r: len(r) >= 2))
    @settings(max_examples=40)
    def test_length_counts_buckets_not_quotes(self, records):
        interval = timedelta(minutes=7)
        step = interval.total_seconds()
        first = int(records[0].timestamp.timestamp() // step)
        last = int(records[-1].timestamp.timestamp() // step)
        if last == first:
            with pytest.raises(EmptyInput):
                resample_last_quote(records, interval)
        else:
            series = resample_last_quote(records, interval)
            assert len(series) == last - first + 1

    def test_carries_bucket_calendar(self):
        records = [quote(0, 99.0, 101.0), quote(59, 99.0, 103.0)]
        series = resample_last_quote(records, timedelta(minutes=30))
        assert series.calendar is not None
        assert series.calendar[0].minute in (0, 30)


class TestLoadSeries:
    def test_price_csv_row_order_defines_time(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("time,price\n0,100\n1,101\n2,99\n")
        series = load_series(path)
        np.testing.assert_allclose(series.times, [0.0, 1.0, 2.0])
        np.testing.assert_allclose(series.values, [100.0, 101.0, 99.0])

    def test_price_csv_with_dates_builds_calendar(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("date,price\n2021-01-04,100\n2021-01-05,101\n")
        series = load_series(path)
        assert series.calendar == [datetime(2021, 1, 4), datetime(2021, 1, 5)]
        np.testing.assert_allclose(series.times, [0.0, 1.0])

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("time,price\n0,100\n1,abc\n")
        with pytest.raises(ParseError) as err:
            load_series(path)
        assert err.value.line == 3

    def test_empty_file(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("")
        with pytest.raises(EmptyInput):
            load_series(path)

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("time,price\n")
        with pytest.raises(EmptyInput):
            load_series(path)

    def test_round_trip_is_exact(self, tmp_path):
        values = [100.0, 100.123456789012345, 99.9999999999999]
        src = tmp_path / "a.csv"
        src.write_text("time,price\n" + "".join(f"{t},{v!r}\n" for t, v in enumerate(values)))
        series = load_series(src)
        dst = tmp_path / "b.csv"
        write_series(series, dst)
        again = load_series(dst)
        assert list(again.values) == list(series.values)
        assert list(again.times) == list(series.times)

    def test_quote_csv_pipeline_drops_crossed_row(self, tmp_path):
        path = tmp_path / "quotes.csv"
        path.write_text(
            "timestamp,bid,ask\n"
            "2021-03-01T10:00:00,99.5,100.5\n"
            "2021-03-01T10:10:00,300.0,100.0\n"   # crossed: would move the mid to 200
            "2021-03-01T10:20:00,99.0,101.0\n"
            "2021-03-01T10:40:00,100.0,102.0\n"
            "2021-03-01T11:10:00,101.0,103.0\n")
        series = load_series(path, "quote-csv")
        np.testing.assert_allclose(series.values, [100.0, 101.0, 102.0])

    def test_quote_csv_all_filtered(self, tmp_path):
        path = tmp_path / "quotes.csv"
        path.write_text("timestamp,bid,ask\n2021-03-01T10:00:00,101.0,100.0\n")
        with pytest.raises(EmptyInput):
            load_series(path, "quote-csv")


class TestMonthlyWindows:
    def _daily(self, start, n):
        return [start + timedelta(days=k) for k in range(n)]

    def test_splits_on_month_boundary(self):
        cal = self._daily(datetime(2021, 1, 2), 40)
        series = Series(times=np.arange(40.0), values=np.linspace(100, 110, 40))
        windows = monthly_windows(series, cal)
        assert [(w.year, w.month) for w in windows] == [(2021, 1), (2021, 2)]
        assert windows[0].start == 0 and windows[1].end == 40
        assert windows[0].series.times[0] == 0.0
        assert windows[1].series.times[0] == 0.0

    def test_single_month_returns_whole_series(self):
        cal = self._daily(datetime(2021, 1, 1), 10)
        series = Series(times=np.arange(10.0), values=np.full(10, 7.0))
        windows = monthly_windows(series, cal)
        assert len(windows) == 1
        np.testing.assert_allclose(windows[0].series.values, series.values)

    def test_single_point_month_dropped(self):
        cal = ([datetime(2021, 1, 31)] + self._daily(datetime(2021, 2, 1), 5))
        series = Series(times=np.arange(6.0), values=np.linspace(1, 2, 6))
        windows = monthly_windows(series, cal)
        assert [(w.year, w.month) for w in windows] == [(2021, 2)]

    def test_length_mismatch(self):
        series = Series(times=np.arange(3.0), values=np.ones(3))
        with pytest.raises(LengthMismatch):
            monthly_windows(series, self._daily(datetime(2021, 1, 1), 2))

    @given(lengths=st.lists(st.integers(min_value=1, max_value=6), min_size=1, max_size=6))
    @settings(max_examples=40)
    def test_cover_and_disjointness(self, lengths):
        cal = []
        for month, n in enumerate(lengths, start=1):
            cal.extend(self._daily(datetime(2021, month, 1), n))
        total = len(cal)
        if total < 2:
            return
        series = Series(times=np.arange(float(total)), values=np.linspace(1, 2, total))
        windows = monthly_windows(series, cal)
        covered = sorted(i for w in windows for i in range(w.start, w.end))
        assert len(covered) == len(set(covered))
        dropped = {i for i, n in _month_spans(lengths) if n < 2}
        assert set(covered) == set(range(total)) - dropped


def _month_spans(lengths):
    """Yield (index, month_length) for every observation index."""
    start = 0
    for n in lengths:
        for i in range(start, start + n):
            yield i, n
        start += n
