"""Dense user-by-day reputation matrices and their CSV form."""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass

import numpy as np

from .model import ReputationSeries


@dataclass
class SeriesMatrix:
    """Reputation of ``users[i]`` at the end of day ``start_day + j`` is ``values[i, j]``.

    ``users`` is sorted ascending; row order is the ranking order used by
    the metrics module.
    """

    users: np.ndarray
    start_day: dt.date
    values: np.ndarray

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.users):
            raise ValueError(f"values shape {self.values.shape} does not match {len(self.users)} users")
        if len(self.users) > 1 and np.any(np.diff(self.users) <= 0):
            raise ValueError("users must be strictly increasing")

    @property
    def n_days(self) -> int:
        return self.values.shape[1]

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_day + dt.timedelta(days=k) for k in range(self.n_days)]

    def row(self, user_id: int) -> int:
        pos = int(np.searchsorted(self.users, user_id))
        if pos >= len(self.users) or self.users[pos] != user_id:
            raise KeyError(user_id)
        return pos

    def series(self, user_id: int) -> ReputationSeries:
        return ReputationSeries(int(user_id), self.start_day, self.values[self.row(user_id)].copy())

    def __contains__(self, user_id) -> bool:
        try:
            self.row(int(user_id))
        except KeyError:
            return False
        return True

    def subset(self, user_ids) -> "SeriesMatrix":
        ids = np.unique(np.asarray(user_ids, dtype=np.int64))
        rows = [self.row(int(u)) for u in ids]
        return SeriesMatrix(ids, self.start_day, self.values[rows])

    def cumulative(self) -> "SeriesMatrix":
        return SeriesMatrix(self.users.copy(), self.start_day, np.cumsum(self.values, axis=1))

    @classmethod
    def from_series(cls, series: list[ReputationSeries]) -> "SeriesMatrix":
        series = sorted(series, key=lambda s: s.user_id)
        start = series[0].start_day
        if any(s.start_day != start for s in series):
            raise ValueError("series start on different days")
        return cls(np.array([s.user_id for s in series]), start, np.vstack([s.values for s in series]))


def write_series_csv(matrix: SeriesMatrix, sink) -> int:
    """Long-format CSV ``user_id,day_index,date,value``; returns data-row count."""
    own = isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__")
    fh = open(sink, "w", newline="", encoding="utf-8") if own else sink
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "day_index", "date", "value"])
        dates = [d.isoformat() for d in matrix.dates]
        rows = 0
        for i, uid in enumerate(matrix.users.tolist()):
            for j, value in enumerate(matrix.values[i].tolist()):
                writer.writerow([uid, j, dates[j], repr(value)])
                rows += 1
        return rows
    finally:
        if own:
            fh.close()


def read_series_csv(source) -> SeriesMatrix:
    own = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
    fh = open(source, newline="", encoding="utf-8") if own else source
    try:
        reader = csv.DictReader(fh)
        cells: dict[int, dict[int, float]] = {}
        start = None
        for rec in reader:
            j = int(rec["day_index"])
            if j == 0:
                start = dt.date.fromisoformat(rec["date"])
            cells.setdefault(int(rec["user_id"]), {})[j] = float(rec["value"])
    finally:
        if own:
            fh.close()
    users = sorted(cells)
    n_days = 1 + max((max(d) for d in cells.values()), default=-1)
    values = np.zeros((len(users), n_days))
    for i, uid in enumerate(users):
        for j, v in cells[uid].items():
            values[i, j] = v
    return SeriesMatrix(np.array(users, dtype=np.int64), start, values)


def series_to_string(matrix: SeriesMatrix) -> str:
    buf = io.StringIO()
    write_series_csv(matrix, buf)
    return buf.getvalue()
