"""Calendar helpers: UTC timestamps and inclusive day windows."""

from __future__ import annotations

import calendar
import datetime as dt
from dataclasses import dataclass

import numpy as np

SECONDS_PER_DAY = 86400
_EPOCH = dt.datetime(1970, 1, 1)


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 dump timestamp into integer seconds since the epoch.

    Fractional seconds are truncated and a trailing ``Z`` is accepted; the
    value is always read as UTC.

    >>> parse_timestamp("2008-09-15T00:00:00.123")
    1221436800
    """
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1]
    dot = text.find(".")
    if dot != -1:
        frac = text[dot + 1:]
        if not frac.isdigit():
            raise ValueError(f"bad fractional seconds in {text!r}")
        text = text[:dot]
    parsed = dt.datetime.fromisoformat(text)
    if parsed.tzinfo is not None:
        raise ValueError(f"timestamps are assumed UTC, got offset in {text!r}")
    delta = parsed - _EPOCH
    return delta.days * SECONDS_PER_DAY + delta.seconds


def format_timestamp(seconds: int) -> str:
    return dt.datetime.fromtimestamp(int(seconds), dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S")


def date_to_seconds(day) -> int:
    """Seconds since the epoch at 00:00:00 UTC of ``day`` (a date or ISO string)."""
    return calendar.timegm(as_date(day).timetuple())


def seconds_to_date(seconds: int) -> dt.date:
    return dt.datetime.fromtimestamp(int(seconds), dt.timezone.utc).date()


def as_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value).strip()[:10])


@dataclass(frozen=True)
class Window:
    """Inclusive range of calendar days ``[start, end]``."""

    start: dt.date
    end: dt.date

    def __post_init__(self):
        object.__setattr__(self, "start", as_date(self.start))
        object.__setattr__(self, "end", as_date(self.end))
        if self.end < self.start:
            raise ValueError(f"empty window: {self.start} > {self.end}")

    @property
    def days(self) -> int:
        return (self.end - self.start).days + 1

    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=k) for k in range(self.days)]

    def day_ends(self) -> np.ndarray:
        """Instant 23:59:59 UTC of every day in the window, as int64 seconds."""
        first = date_to_seconds(self.start) + SECONDS_PER_DAY - 1
        return first + SECONDS_PER_DAY * np.arange(self.days, dtype=np.int64)

    def first_second(self) -> int:
        return date_to_seconds(self.start)

    def last_second(self) -> int:
        return date_to_seconds(self.end) + SECONDS_PER_DAY - 1

    def day_index(self, seconds) -> np.ndarray:
        """Zero-based day offset of each instant relative to ``start``."""
        return (np.asarray(seconds, dtype=np.int64) - self.first_second()) // SECONDS_PER_DAY

    @classmethod
    def covering(cls, timestamps) -> "Window":
        ts = np.asarray(timestamps, dtype=np.int64)
        if ts.size == 0:
            raise ValueError("cannot infer a window from no timestamps")
        return cls(seconds_to_date(int(ts.min())), seconds_to_date(int(ts.max())))

    @classmethod
    def parse(cls, text: str) -> "Window":
        """Read ``"YYYY-MM-DD,YYYY-MM-DD"`` (or ``..`` as separator)."""
        sep = ".." if ".." in text else ","
        start, end = text.split(sep)
        return cls(as_date(start), as_date(end))

    def __str__(self):
        return f"{self.start.isoformat()},{self.end.isoformat()}"
