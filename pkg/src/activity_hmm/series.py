"""Daily event-count series, window statistics and inter-arrival sequences.

Days are integer offsets from the series start; day 1 is ``start_day``.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class SeriesError(ValueError):
    """Raised on malformed or inconsistent event data."""


@dataclass(frozen=True)
class EventRecord:
    date: dt.date
    count: int = 1

    def __post_init__(self):
        if not isinstance(self.date, dt.date):
            object.__setattr__(self, "date", parse_date(self.date))
        if int(self.count) != self.count or self.count < 0:
            raise SeriesError(f"count must be a nonnegative integer, got {self.count!r}")
        object.__setattr__(self, "count", int(self.count))


def parse_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value).strip())
    except ValueError as exc:
        raise SeriesError(f"malformed date {value!r}") from exc


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EventSeries:
    """Zero-filled daily counts ``M_1..M_N`` starting at ``start_day``."""

    start_day: dt.date
    counts: np.ndarray

    def __post_init__(self):
        counts = _readonly(self.counts)
        if counts.ndim != 1 or counts.size < 1:
            raise SeriesError("an event series needs at least one day")
        if (counts < 0).any():
            raise SeriesError("daily counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "start_day", parse_date(self.start_day))

    def __len__(self) -> int:
        return int(self.counts.size)

    @property
    def n_days(self) -> int:
        return int(self.counts.size)

    @property
    def end_day(self) -> dt.date:
        return self.start_day + dt.timedelta(days=self.n_days - 1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def active_days(self) -> int:
        return int((self.counts > 0).sum())

    def day_of(self, date: dt.date) -> int:
        """1-based day index of ``date``."""
        return (parse_date(date) - self.start_day).days + 1

    def date_of(self, day: int) -> dt.date:
        return self.start_day + dt.timedelta(days=int(day) - 1)

    def __eq__(self, other):
        if not isinstance(other, EventSeries):
            return NotImplemented
        return self.start_day == other.start_day and np.array_equal(self.counts, other.counts)

    __hash__ = None

    def to_records(self) -> list[EventRecord]:
        return [EventRecord(self.date_of(i + 1), int(c)) for i, c in enumerate(self.counts) if c > 0]

    def to_dict(self) -> dict:
        return {
            "type": "EventSeries",
            "start_day": self.start_day.isoformat(),
            "counts": [int(c) for c in self.counts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EventSeries":
        return cls(parse_date(d["start_day"]), d["counts"])


@dataclass(frozen=True)
class WindowSeries:
    """Per-window (X_n, Y_n): active days and total attacks in each ``delta``-day window.

    ``lengths`` holds the number of days actually covered by each window; only
    the last window can be shorter than ``delta`` and is then flagged ``partial``.
    """

    delta: int
    x: np.ndarray
    y: np.ndarray
    lengths: np.ndarray
    partial: bool = False

    def __post_init__(self):
        for name in ("x", "y", "lengths"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    def __len__(self) -> int:
        return int(self.x.size)

    @property
    def n_full(self) -> int:
        return len(self) - int(self.partial)

    @property
    def windows(self) -> list[tuple[int, int]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def full(self) -> "WindowSeries":
        """Drop the ragged final window, if any."""
        if not self.partial:
            return self
        return WindowSeries(self.delta, self.x[:-1], self.y[:-1], self.lengths[:-1], False)

    def to_dict(self) -> dict:
        return {
            "type": "WindowSeries",
            "delta": self.delta,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "lengths": self.lengths.tolist(),
            "partial": self.partial,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WindowSeries":
        return cls(d["delta"], d["x"], d["y"], d["lengths"], d["partial"])


@dataclass(frozen=True)
class InterArrivalSeries:
    """Activity days ``t_1..t_N`` and gaps ``dT_k = t_k - t_{k-1}`` with ``t_0 = 0``."""

    durations: np.ndarray
    t_list: np.ndarray = field(default=None)

    def __post_init__(self):
        durations = _readonly(self.durations)
        if (durations < 1).any():
            raise SeriesError("inter-arrival durations must be >= 1")
        object.__setattr__(self, "durations", durations)
        t = np.cumsum(durations) if self.t_list is None else self.t_list
        t = _readonly(t)
        if not np.array_equal(np.diff(np.concatenate([[0], t])), durations):
            raise SeriesError("durations inconsistent with t_list")
        object.__setattr__(self, "t_list", t)

    def __len__(self) -> int:
        return int(self.durations.size)

    def to_dict(self) -> dict:
        return {
            "type": "InterArrivalSeries",
            "durations": self.durations.tolist(),
            "t_list": self.t_list.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InterArrivalSeries":
        return cls(d["durations"], d["t_list"])


def ingest(records: Iterable[EventRecord], span: tuple | None = None,
           start_day: dt.date | None = None) -> EventSeries:
    """Reduce records to a zero-filled daily series; same-day records are summed.

    ``span`` is an inclusive ``(first, last)`` pair of dates.  Integers are
    accepted too and are read as 1-based day numbers relative to ``start_day``
    (default 2000-01-01), which keeps toy examples short.
    """
    base = parse_date(start_day) if start_day is not None else dt.date(2000, 1, 1)

    def as_date(v):
        if isinstance(v, (int, np.integer)):
            return base + dt.timedelta(days=int(v) - 1)
        return parse_date(v)

    records = [r if isinstance(r, EventRecord) else EventRecord(as_date(r[0]), r[1]) for r in records]
    if span is None:
        if not records:
            raise SeriesError("need records or an explicit span")
        first = min(r.date for r in records)
        last = max(r.date for r in records)
    else:
        first, last = as_date(span[0]), as_date(span[1])
        if last < first:
            raise SeriesError("span end precedes span start")
    counts = np.zeros((last - first).days + 1, dtype=np.int64)
    for r in records:
        i = (r.date - first).days
        if i < 0 or i >= counts.size:
            raise SeriesError(f"record {r.date} outside span {first}..{last}")
        counts[i] += r.count
    return EventSeries(first, counts)


def windowize(series: EventSeries, delta: int) -> WindowSeries:
    if int(delta) != delta or delta < 1:
        raise SeriesError(f"window length must be a positive integer, got {delta!r}")
    delta = int(delta)
    m = series.counts
    starts = np.arange(0, m.size, delta)
    y = np.add.reduceat(m, starts)
    x = np.add.reduceat((m > 0).astype(np.int64), starts)
    lengths = np.minimum(delta, m.size - starts)
    return WindowSeries(delta, x, y, lengths, bool(lengths[-1] < delta))


def interarrivals(series: EventSeries) -> InterArrivalSeries:
    t = np.flatnonzero(series.counts > 0) + 1
    if t.size == 0:
        raise SeriesError("series has no activity days")
    return InterArrivalSeries(np.diff(np.concatenate([[0], t])), t)


def _batches_by_year(extra: Sequence[EventRecord]) -> list[list[EventRecord]]:
    # batch j holds the j-th record (in date order) of every calendar year
    by_year = defaultdict(list)
    for r in sorted(extra, key=lambda r: (r.date, r.count)):
        by_year[r.date.year].append(r)
    n = max((len(v) for v in by_year.values()), default=0)
    return [[v[j] for _, v in sorted(by_year.items()) if j < len(v)] for j in range(n)]


def merge_missing(base: EventSeries, extra: Sequence[EventRecord],
                  steps: int | None = None) -> list[EventSeries]:
    """Cumulatively add ``extra`` records to ``base``, one record per calendar year per step.

    Returns the augmented series after each of the first ``steps`` batches
    (all batches when ``steps`` is None), or ``[base]`` when there is nothing to add.
    """
    extra = [r if isinstance(r, EventRecord) else EventRecord(*r) for r in extra]
    for r in extra:
        if not base.start_day <= r.date <= base.end_day:
            raise SeriesError(f"record {r.date} outside base span")
    batches = _batches_by_year(extra)
    if steps is not None:
        batches = batches[:steps]
    if not batches:
        return [base]
    out = []
    counts = base.counts.copy()
    for batch in batches:
        for r in batch:
            counts[base.day_of(r.date) - 1] += r.count
        out.append(EventSeries(base.start_day, counts.copy()))
    return out


# I/O ------------------------------------------------------------------------

def read_csv(path) -> list[EventRecord]:
    """Read ``date,count`` rows, or an incident list with one row per incident.

    Incident files only need a ``date`` column; every row counts as one attack.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "date" not in reader.fieldnames:
            raise SeriesError(f"{path}: expected a 'date' column in the header")
        has_count = "count" in reader.fieldnames
        records = []
        for lineno, row in enumerate(reader, start=2):
            try:
                count = int(row["count"]) if has_count else 1
                records.append(EventRecord(parse_date(row["date"]), count))
            except (SeriesError, ValueError, TypeError) as exc:
                raise SeriesError(f"{path}:{lineno}: {exc}") from exc
    return records


def load_series(path, span: tuple | None = None) -> EventSeries:
    path = Path(path)
    if path.suffix == ".json":
        return EventSeries.from_dict(json.loads(path.read_text()))
    return ingest(read_csv(path), span)


def write_csv(series: EventSeries, path) -> None:
    """Write the zero-filled series as ``date,count``; reads back to an equal series."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "count"])
        for i, c in enumerate(series.counts):
            w.writerow([series.date_of(i + 1).isoformat(), int(c)])
