"""Rank-place agreement between two reputation systems.

Users are ranked every day (rank 1 = highest value, ties go to the lower
user id). For each user the absolute rank-place difference between the
reference and the model is averaged over days; the score is one minus the
mean of those averages divided by the number of rank places.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DataError, DimensionMismatchError
from .series import SeriesMatrix


@dataclass
class RankTable:
    users: np.ndarray
    ranks: np.ndarray  # (n_users, n_days), each column a permutation of 1..N

    @property
    def n_users(self) -> int:
        return self.ranks.shape[0]

    @property
    def n_days(self) -> int:
        return self.ranks.shape[1]


@dataclass
class MetricReport:
    mu: float
    sigma: float
    per_user_avg_diff: np.ndarray
    n_users: int
    n_days: int
    params_echo: dict = field(default_factory=dict)


def _check_finite(values: np.ndarray, users: np.ndarray):
    bad = ~np.isfinite(values)
    if bad.any():
        row = np.argwhere(bad)[0]
        raise DataError(f"non-finite reputation for user {int(users[row[0]])}")


def rank_users(values, user_ids=None) -> np.ndarray:
    """Rank places of one day's values.

    ``values`` is a sequence aligned with ``user_ids`` (default: positions)
    or a ``{user_id: value}`` dict, in which case a dict is returned.
    """
    as_dict = isinstance(values, dict)
    if as_dict:
        user_ids = np.array(sorted(values), dtype=np.int64)
        values = np.array([values[u] for u in user_ids.tolist()], dtype=np.float64)
    else:
        values = np.asarray(values, dtype=np.float64)
        user_ids = np.arange(len(values)) if user_ids is None else np.asarray(user_ids, dtype=np.int64)
    _check_finite(values, user_ids)
    order = np.lexsort((user_ids, -values))
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(1, len(values) + 1)
    if as_dict:
        return dict(zip(user_ids.tolist(), ranks.tolist()))
    return ranks


def rank_table(matrix: SeriesMatrix) -> RankTable:
    """Rank every day column of ``matrix`` (rows are sorted by user id)."""
    values = matrix.values
    _check_finite(values, matrix.users)
    n, d = values.shape
    ranks = np.empty((n, d), dtype=np.int64)
    if n:
        # stable sort on negated values: descending value, ascending row (= user id) on ties
        order = np.argsort(-values, axis=0, kind="stable")
        np.put_along_axis(ranks, order, np.arange(1, n + 1, dtype=np.int64)[:, None].repeat(d, axis=1), axis=0)
    return RankTable(matrix.users.copy(), ranks)


def mu_metric(ranks_reference: RankTable, ranks_model: RankTable, params_echo: Optional[dict] = None) -> MetricReport:
    """Agreement score in ``(0, 1]`` with per-user average rank differences."""
    if ranks_reference.ranks.shape != ranks_model.ranks.shape:
        raise DimensionMismatchError(f"rank tables differ in shape: {ranks_reference.ranks.shape} vs {ranks_model.ranks.shape}")
    if not np.array_equal(ranks_reference.users, ranks_model.users):
        raise DimensionMismatchError("rank tables list different users")
    n, d = ranks_reference.ranks.shape
    if n == 0 or d == 0:
        raise DimensionMismatchError("rank tables are empty")
    diff = np.abs(ranks_reference.ranks - ranks_model.ranks)
    per_user = diff.sum(axis=1) / d
    mu = 1.0 - per_user.mean() / n
    report = MetricReport(float(mu), 0.0, per_user, n, d, dict(params_echo or {}))
    report.sigma = sigma_metric(report)
    return report


def sigma_metric(report: MetricReport) -> float:
    """Population standard deviation of the per-user normalised rank differences."""
    return float(np.std(report.per_user_avg_diff / report.n_users))


def compare_series(reference: SeriesMatrix, model: SeriesMatrix, params_echo: Optional[dict] = None) -> MetricReport:
    return mu_metric(rank_table(reference), rank_table(model), params_echo)
