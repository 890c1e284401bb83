"""Observation series: quote cleaning, resampling, CSV ingestion, and
monthly windowing.

Quote handling follows the usual intraday hygiene for NBBO-style feeds:
drop crossed quotes, cap the spread, keep the last valid mid-price per
resampling interval and forward-fill empty intervals.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from itertools import groupby
from pathlib import Path

import numpy as np

from .errors import EmptyInput, LengthMismatch, ParseError

DEFAULT_SPREAD_CAP = 5.0
DEFAULT_QUOTE_INTERVAL = timedelta(minutes=30)


@dataclass
class Series:
    """Ordered (time, value) observations with strictly increasing times.

    ``times`` are in model time units (trading days, 30-minute bars, ...);
    ``calendar`` optionally carries one wall-clock datetime per observation
    for calendar-based windowing.
    """

    times: np.ndarray
    values: np.ndarray
    label: str = ""
    time_unit: str = "step"
    calendar: list[datetime] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.values.ndim != 1:
            raise ValueError("times and values must be one-dimensional")
        if len(self.times) != len(self.values):
            raise LengthMismatch(
                f"times ({len(self.times)}) and values ({len(self.values)}) differ in length"
            )
        if len(self.times) < 2:
            raise EmptyInput("a series needs at least 2 observations")
        if not np.all(np.isfinite(self.times)) or not np.all(np.isfinite(self.values)):
            raise ValueError("times and values must be finite")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.calendar is not None and len(self.calendar) != len(self.times):
            raise LengthMismatch("calendar must have one datetime per observation")

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class QuoteRecord:
    """A single bid/ask quote. Crossedness is data, filtered later."""

    timestamp: datetime
    bid: float
    ask: float

    def __post_init__(self):
        if not (np.isfinite(self.bid) and self.bid > 0):
            raise ValueError(f"bid must be finite and positive, got {self.bid}")
        if not (np.isfinite(self.ask) and self.ask > 0):
            raise ValueError(f"ask must be finite and positive, got {self.ask}")

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)


@dataclass
class Window:
    """A calendar-month slice of a parent series, times re-based to 0."""

    series: Series
    year: int
    month: int
    start: int  # index into the parent series
    end: int    # exclusive

    @property
    def tag(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def clean_quotes(records: list[QuoteRecord], spread_cap: float = DEFAULT_SPREAD_CAP) -> list[QuoteRecord]:
    """Drop crossed quotes (bid > ask) and spreads at or above ``spread_cap``."""
    if spread_cap <= 0:
        raise ValueError(f"spread_cap must be positive, got {spread_cap}")
    return [r for r in records if r.bid <= r.ask and (r.ask - r.bid) < spread_cap]


def resample_last_quote(records: list[QuoteRecord], interval: timedelta = DEFAULT_QUOTE_INTERVAL) -> Series:
    """Last valid mid-price per ``interval`` bucket, forward-filling gaps.

    Buckets are aligned to multiples of ``interval`` since the epoch, so a
    30-minute interval yields the usual :00/:30 bars. The output series uses
    consecutive integer times (one unit per bucket) and carries the bucket
    start datetimes as its calendar.
    """
    if interval <= timedelta(0):
        raise ValueError("interval must be positive")
    if not records:
        raise EmptyInput("no quotes to resample")

    step = interval.total_seconds()

    def bucket_of(rec: QuoteRecord) -> int:
        ts = rec.timestamp
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        return int(np.floor(ts.timestamp() / step))

    first, last = bucket_of(records[0]), bucket_of(records[-1])
    n_buckets = last - first + 1
    if n_buckets < 2:
        raise EmptyInput("quotes span fewer than 2 resampling intervals")

    mids = np.full(n_buckets, np.nan)
    for rec in records:  # later records in a bucket overwrite earlier ones
        mids[bucket_of(rec) - first] = rec.mid
    for k in range(1, n_buckets):
        if np.isnan(mids[k]):
            mids[k] = mids[k - 1]

    tz = records[0].timestamp.tzinfo
    calendar = [
        datetime.fromtimestamp((first + k) * step, tz=timezone.utc if tz is None else tz)
        for k in range(n_buckets)
    ]
    if tz is None:
        calendar = [ts.replace(tzinfo=None) for ts in calendar]

    unit = f"{interval.total_seconds() / 60:g}-minute-bar"
    return Series(times=np.arange(n_buckets, dtype=float), values=mids,
                  time_unit=unit, calendar=calendar)


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"cannot parse {column} value {text!r}", line=line) from None


def _parse_datetime(text: str, line: int) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"cannot parse ISO-8601 timestamp {text!r}", line=line) from None


def load_series(path, format: str = "price-csv", *,
                spread_cap: float = DEFAULT_SPREAD_CAP,
                interval: timedelta = DEFAULT_QUOTE_INTERVAL) -> Series:
    """Read a series from a delimited file.

    price-csv: header ``time,price`` (real-valued times kept as-is) or
    ``date,price`` (ISO dates become the calendar, times are the row order).
    quote-csv: header ``timestamp,bid,ask``; rows are cleaned and resampled.
    """
    path = Path(path)
    if format == "price-csv":
        return _load_price_csv(path)
    if format == "quote-csv":
        return _load_quote_csv(path, spread_cap=spread_cap, interval=interval)
    raise ValueError(f"unknown format {format!r}")


def _load_price_csv(path: Path) -> Series:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInput(f"{path} is empty") from None
        header = [h.strip().lower() for h in header]
        if header == ["time", "price"]:
            dated = False
        elif header == ["date", "price"]:
            dated = True
        else:
            raise ParseError(f"expected header 'time,price' or 'date,price', got {header}", line=1)

        times: list[float] = []
        values: list[float] = []
        calendar: list[datetime] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 columns, got {len(row)}", line=lineno)
            if dated:
                calendar.append(_parse_datetime(row[0], lineno))
                times.append(float(len(times)))
            else:
                times.append(_parse_float(row[0], lineno, "time"))
            values.append(_parse_float(row[1], lineno, "price"))

    if not values:
        raise EmptyInput(f"{path} has no data rows")
    return Series(times=np.array(times), values=np.array(values),
                  label=path.stem, time_unit="row" if not dated else "trading-day",
                  calendar=calendar if dated else None)


def _load_quote_csv(path: Path, *, spread_cap: float, interval: timedelta) -> Series:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInput(f"{path} is empty") from None
        header = [h.strip().lower() for h in header]
        if header != ["timestamp", "bid", "ask"]:
            raise ParseError(f"expected header 'timestamp,bid,ask', got {header}", line=1)

        records: list[QuoteRecord] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 columns, got {len(row)}", line=lineno)
            ts = _parse_datetime(row[0], lineno)
            bid = _parse_float(row[1], lineno, "bid")
            ask = _parse_float(row[2], lineno, "ask")
            try:
                records.append(QuoteRecord(timestamp=ts, bid=bid, ask=ask))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None

    if not records:
        raise EmptyInput(f"{path} has no data rows")
    records.sort(key=lambda r: r.timestamp)
    cleaned = clean_quotes(records, spread_cap=spread_cap)
    if not cleaned:
        raise EmptyInput(f"{path}: no quotes survive cleaning")
    out = resample_last_quote(cleaned, interval=interval)
    out.label = path.stem
    return out


def write_series(series: Series, path) -> None:
    """Write a series back to price-csv; inverse of :func:`load_series`."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if series.calendar is not None:
            writer.writerow(["date", "price"])
            for ts, value in zip(series.calendar, series.values):
                writer.writerow([ts.isoformat(), repr(float(value))])
        else:
            writer.writerow(["time", "price"])
            for t, value in zip(series.times, series.values):
                writer.writerow([repr(float(t)), repr(float(value))])


def monthly_windows(series: Series, calendar: list[datetime]) -> list[Window]:
    """Split into non-overlapping calendar-month windows.

    Consecutive observations sharing (year, month) form one window; windows
    with fewer than 2 points are dropped (the likelihood needs at least one
    transition). Window times are re-based to start at 0, keeping spacing.
    """
    if len(calendar) != len(series):
        raise LengthMismatch(
            f"calendar ({len(calendar)}) and series ({len(series)}) differ in length"
        )

    windows: list[Window] = []
    start = 0
    for (year, month), group in groupby(calendar, key=lambda ts: (ts.year, ts.month)):
        count = sum(1 for _ in group)
        end = start + count
        if count >= 2:
            sub = Series(
                times=series.times[start:end] - series.times[start],
                values=series.values[start:end].copy(),
                label=series.label,
                time_unit=series.time_unit,
                calendar=list(calendar[start:end]),
            )
            windows.append(Window(series=sub, year=year, month=month, start=start, end=end))
        start = end
    return windows
