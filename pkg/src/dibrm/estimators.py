"""scikit-learn compatible wrappers around the reputation models.

The estimators learn a user universe and an observation window in ``fit``
and map interaction (or vote) logs to dense ``(n_users, n_days)`` matrices
in ``transform``. They compose with :class:`sklearn.pipeline.Pipeline`,
``clone`` and ``set_params`` so parameter sweeps are plain loops over
``ParameterGrid``.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .model import ModelParams, UserTrustState, decayed_values, reputation_at, trust_trajectory, _step
from .exceptions import CorruptLogError
from .metrics import compare_series
from .series import SeriesMatrix
from .so_sim import PostIndex, ReputationRuleTable, daily_so_series
from .validation import check_events, check_users, check_votes, check_window


class DIBRMReputation(TransformerMixin, BaseEstimator):
    """Daily interaction-based reputation of every user.

    Parameters
    ----------
    alpha : float
        Weight of the streak bonus; the bonus per interaction tends to
        ``basic_value * alpha``.
    beta : float
        Decay multiplier applied once per elapsed activity period, in [0, 1].
    activity_period_days : float
        Length of one activity period.
    basic_value : float
        Value of an interaction when the input does not carry one.
    start, end : date-like or None
        Observation window (inclusive). Missing bounds are taken from the
        events seen in ``fit``.
    users : iterable of int or None
        Fixed row set. Users without events get all-zero rows.
    historical : bool
        Return running sums of the daily values instead.

    Attributes
    ----------
    users_ : ndarray of int
    window_ : Window
    states_ : dict[int, UserTrustState]
        State after the last interaction seen per user.
    """

    def __init__(
        self,
        alpha: float = 1.0,
        beta: float = 0.99,
        activity_period_days: float = 1.0,
        basic_value: float = 1.0,
        day_length_seconds: int = 86400,
        start=None,
        end=None,
        users=None,
        historical: bool = False,
    ):
        self.alpha = alpha
        self.beta = beta
        self.activity_period_days = activity_period_days
        self.basic_value = basic_value
        self.day_length_seconds = day_length_seconds
        self.start = start
        self.end = end
        self.users = users
        self.historical = historical

    def _model_params(self) -> ModelParams:
        return ModelParams(
            alpha=self.alpha,
            beta=self.beta,
            activity_period_days=self.activity_period_days,
            default_basic_value=self.basic_value,
            day_length_seconds=self.day_length_seconds,
        )

    def fit(self, X, y=None):
        log = check_events(X, self.basic_value)
        self.params_ = self._model_params()
        self.window_ = check_window(self.start, self.end, log.timestamps)
        self.users_ = check_users(self.users, log.users)
        self.states_ = {}
        for uid in log.users.tolist():
            ts, bv = log.slice(uid)
            trusts, streaks = trust_trajectory(ts, bv, self.params_)
            self.states_[uid] = UserTrustState(float(trusts[-1]), int(streaks[-1]), int(ts[-1]))
        return self

    def partial_fit(self, X, y=None):
        """Fold further events into ``states_`` without replaying history."""
        if not hasattr(self, "states_"):
            return self.fit(X)
        log = check_events(X, self.basic_value)
        for uid in log.users.tolist():
            state = self.states_.get(uid, UserTrustState())
            trust, streak, last = state.trust, state.activity_streak, state.last_interaction
            ts, bv = log.slice(uid)
            for t, v in zip(ts.tolist(), bv.tolist()):
                if last is not None and t < last:
                    raise CorruptLogError(f"user {uid}: event at {t} precedes state at {last}")
                trust, streak, last = _step(trust, streak, last, t, v, self.params_)
            self.states_[uid] = UserTrustState(trust, streak, last)
        return self

    def transform_series(self, X) -> SeriesMatrix:
        check_is_fitted(self, "states_")
        log = check_events(X, self.basic_value)
        day_ends = self.window_.day_ends()
        values = np.zeros((len(self.users_), len(day_ends)))
        for row, uid in enumerate(self.users_.tolist()):
            ts, bv = log.slice(uid)
            if len(ts):
                if np.any(np.diff(ts) < 0):
                    raise CorruptLogError(f"events of user {uid} are not sorted")
                trusts, _ = trust_trajectory(ts, bv, self.params_)
                values[row] = decayed_values(ts, trusts, day_ends, self.params_)
        if self.historical:
            values = np.cumsum(values, axis=1)
        return SeriesMatrix(self.users_.copy(), self.window_.start, values)

    def transform(self, X):
        return self.transform_series(X).values

    def reputation_at(self, user_id: int, timestamp: int) -> float:
        check_is_fitted(self, "states_")
        return reputation_at(self.states_.get(int(user_id), UserTrustState()), int(timestamp), self.params_)

    def score(self, X, y):
        """Rank agreement of the transformed log with reference matrix ``y``."""
        return rank_agreement_score(y, self.transform(X))


class HistoricalReputation(TransformerMixin, BaseEstimator):
    """Running sum along the day axis of a ``(n_users, n_days)`` matrix."""

    def fit(self, X, y=None):
        check_array(X, ensure_min_samples=0)
        return self

    def transform(self, X):
        return np.cumsum(check_array(X, dtype=np.float64, ensure_min_samples=0), axis=1)


class SOReputationSimulator(TransformerMixin, BaseEstimator):
    """Vote-based daily reputation, credited to post authors through a rule table.

    ``fit`` needs the post index (``posts=``) to resolve vote targets;
    ``transform`` maps a vote log to the ``(n_users, n_days)`` matrix.
    """

    def __init__(self, rules: Optional[ReputationRuleTable] = None, start=None, end=None, users=None):
        self.rules = rules
        self.start = start
        self.end = end
        self.users = users

    def _rules(self) -> ReputationRuleTable:
        if self.rules is None:
            return ReputationRuleTable.default()
        if isinstance(self.rules, ReputationRuleTable):
            return self.rules
        return ReputationRuleTable.from_file(self.rules)

    def fit(self, X, y=None, posts=None):
        if posts is None:
            raise ValueError("SOReputationSimulator.fit needs posts=")
        votes = check_votes(X)
        self.posts_ = posts if isinstance(posts, PostIndex) else PostIndex.from_records(posts)
        self.rules_ = self._rules()
        self.window_ = check_window(self.start, self.end, votes.timestamps)
        result = daily_so_series(votes, self.posts_, self.rules_, self.window_, self.users)
        self.users_ = result.matrix.users
        self.stats_ = result.stats
        self.reputation_ = result.final_totals
        return self

    def transform_series(self, X) -> SeriesMatrix:
        check_is_fitted(self, "posts_")
        return daily_so_series(check_votes(X), self.posts_, self.rules_, self.window_, self.users_).matrix

    def transform(self, X):
        return self.transform_series(X).values


def rank_agreement_score(y_true, y_pred) -> float:
    """Rank-place agreement of two ``(n_users, n_days)`` matrices whose rows are sorted by user id."""
    y_true = check_array(y_true, dtype=np.float64)
    y_pred = check_array(y_pred, dtype=np.float64)
    users = np.arange(len(y_true))
    return compare_series(SeriesMatrix(users, None, y_true), SeriesMatrix(users, None, y_pred)).mu
