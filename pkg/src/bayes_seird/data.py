"""Reading cumulative case CSVs and turning them into day-indexed observations."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

REQUIRED_COLUMNS = ("date", "confirmed", "recovered", "deaths")
DEFAULT_TRAIN_END = dt.date(2020, 5, 1)


class DataError(ValueError):
    """Malformed or inconsistent case data."""


@dataclass(frozen=True)
class RawCaseRecord:
    date: dt.date
    confirmed_cum: int
    recovered_cum: int
    deaths_cum: int

    def __post_init__(self):
        counts = (self.confirmed_cum, self.recovered_cum, self.deaths_cum)
        if any(c < 0 for c in counts):
            raise DataError(f"{self.date}: negative count in {counts}")
        if self.confirmed_cum < self.recovered_cum + self.deaths_cum:
            raise DataError(
                f"{self.date}: confirmed ({self.confirmed_cum}) is less than "
                f"recovered + deaths ({self.recovered_cum + self.deaths_cum})"
            )


@dataclass
class ObservedSeries:
    """Daily Active Infections, Recovered and Deaths, indexed from ``day0_date``.

    Days ``0 .. train_len - 1`` are the training window, the rest are test days.
    """

    active: np.ndarray
    recovered: np.ndarray
    deaths: np.ndarray
    train_len: int
    day0_date: dt.date | None = None
    test_len: int = field(init=False)

    def __post_init__(self):
        self.active = np.asarray(self.active, dtype=np.int64)
        self.recovered = np.asarray(self.recovered, dtype=np.int64)
        self.deaths = np.asarray(self.deaths, dtype=np.int64)
        n = len(self.active)
        if not (len(self.recovered) == len(self.deaths) == n):
            raise DataError("active, recovered and deaths must have equal length")
        if not 1 <= self.train_len <= n:
            raise DataError(f"train_len {self.train_len} outside 1..{n}")
        for name in ("active", "recovered", "deaths"):
            if np.any(getattr(self, name) < 0):
                raise DataError(f"{name} contains negative counts")
        self.test_len = n - self.train_len

    def __len__(self) -> int:
        return len(self.active)

    @property
    def days(self) -> np.ndarray:
        return np.arange(len(self))

    def as_array(self) -> np.ndarray:
        """Counts as an ``(n_days, 3)`` array with columns I, R, D."""
        return np.column_stack([self.active, self.recovered, self.deaths])

    def check_cumulative(self) -> None:
        for name in ("recovered", "deaths"):
            if np.any(np.diff(getattr(self, name)) < 0):
                day = int(np.argmax(np.diff(getattr(self, name)) < 0)) + 1
                raise DataError(f"cumulative {name} decreases on day {day}")


def _parse_count(text: str, column: str, lineno: int) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        raise DataError(f"line {lineno}: {column} is not an integer count: {text!r}") from None


def parse_csv(path) -> list[RawCaseRecord]:
    """Read a ``date,confirmed,recovered,deaths`` CSV, sorted by date.

    Header names are matched case-insensitively; dates are ISO-8601. Gaps or
    duplicate dates raise :class:`DataError`.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such case file: {path}")
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        idx = {c: header.index(c) for c in REQUIRED_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[idx["date"]].strip())
            except ValueError:
                raise DataError(f"line {lineno}: bad date {row[idx['date']]!r}") from None
            try:
                rec = RawCaseRecord(
                    date,
                    _parse_count(row[idx["confirmed"]], "confirmed", lineno),
                    _parse_count(row[idx["recovered"]], "recovered", lineno),
                    _parse_count(row[idx["deaths"]], "deaths", lineno),
                )
            except DataError as exc:
                raise DataError(f"line {lineno}: {exc}") from None
            records.append(rec)
    if not records:
        raise DataError(f"{path} has no data rows")
    records.sort(key=lambda r: r.date)
    for prev, cur in zip(records, records[1:]):
        gap = (cur.date - prev.date).days
        if gap == 0:
            raise DataError(f"duplicate date {cur.date}")
        if gap > 1:
            raise DataError(f"date gap between {prev.date} and {cur.date}")
    return records


def derive_series(records, train_end: dt.date | str = DEFAULT_TRAIN_END) -> ObservedSeries:
    """Active Infections ``CI - R - D`` on a day index starting at the first record."""
    records = sorted(records, key=lambda r: r.date)
    if isinstance(train_end, str):
        train_end = dt.date.fromisoformat(train_end)
    first, last = records[0].date, records[-1].date
    if not first <= train_end <= last:
        raise DataError(f"train_end {train_end} outside data range {first}..{last}")
    for prev, cur in zip(records, records[1:]):
        if (cur.date - prev.date).days != 1:
            raise DataError(f"records are not consecutive at {cur.date}")
    confirmed = np.array([r.confirmed_cum for r in records], dtype=np.int64)
    recovered = np.array([r.recovered_cum for r in records], dtype=np.int64)
    deaths = np.array([r.deaths_cum for r in records], dtype=np.int64)
    obs = ObservedSeries(
        active=confirmed - recovered - deaths,
        recovered=recovered,
        deaths=deaths,
        train_len=(train_end - first).days + 1,
        day0_date=first,
    )
    obs.check_cumulative()
    return obs


def load_series(path, train_end: dt.date | str = DEFAULT_TRAIN_END) -> ObservedSeries:
    return derive_series(parse_csv(path), train_end)


def write_csv(path, dates, confirmed, recovered, deaths) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUIRED_COLUMNS)
        for row in zip(dates, confirmed, recovered, deaths):
            w.writerow([row[0].isoformat(), *(int(v) for v in row[1:])])
