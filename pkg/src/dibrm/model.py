"""Interaction-based reputation recurrence with forgetting, cumulative and activity-period factors.

Every user carries a three-field state ``(trust, streak, last_interaction)``.
An interaction arriving ``gap`` seconds after the previous one spans
``floor(gap / activity_period)`` whole periods; the stored trust is decayed
by ``beta`` once per period and the interaction value is added on top.
Interactions that land inside the same period extend the activity streak,
which grows the cumulative bonus towards ``basic_value * alpha``.
"""

from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .exceptions import ConfigurationError, CorruptLogError, InvalidQueryError, NumericOverflowError
from .timeutil import SECONDS_PER_DAY, Window


class InteractionKind(str, enum.Enum):
    QUESTION = "post-question"
    ANSWER = "post-answer"
    COMMENT = "comment"

    @property
    def order(self) -> int:
        # posts sort before comments at equal timestamps
        return 1 if self is InteractionKind.COMMENT else 0


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the recurrence.

    ``activity_period_days`` is converted to seconds with
    ``day_length_seconds`` so that gaps measured on integer-second
    timestamps are floored exactly once.
    """

    alpha: float = 1.0
    beta: float = 0.99
    activity_period_days: float = 1.0
    default_basic_value: float = 1.0
    day_length_seconds: int = SECONDS_PER_DAY

    def __post_init__(self):
        for name in ("alpha", "beta", "activity_period_days", "default_basic_value"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ConfigurationError(f"{name} must be a finite real, got {value!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"beta must lie in [0, 1], got {self.beta}")
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be non-negative, got {self.alpha}")
        if self.activity_period_days <= 0:
            raise ConfigurationError(f"activity_period_days must be positive, got {self.activity_period_days}")
        if self.default_basic_value < 0:
            raise ConfigurationError(f"default_basic_value must be non-negative, got {self.default_basic_value}")
        if int(self.day_length_seconds) != self.day_length_seconds or self.day_length_seconds <= 0:
            raise ConfigurationError(f"day_length_seconds must be a positive integer, got {self.day_length_seconds}")

    @property
    def period_seconds(self):
        """Activity period in seconds; an ``int`` whenever it is integral."""
        seconds = self.activity_period_days * self.day_length_seconds
        return int(seconds) if float(seconds).is_integer() else float(seconds)


@dataclass(frozen=True)
class InteractionEvent:
    user_id: int
    timestamp: int
    kind: InteractionKind = InteractionKind.COMMENT
    basic_value: float = 1.0
    source_id: int = 0

    def __post_init__(self):
        if self.basic_value < 0 or not math.isfinite(self.basic_value):
            raise ValueError(f"basic_value must be finite and >= 0, got {self.basic_value}")


@dataclass(frozen=True, slots=True)
class UserTrustState:
    trust: float = 0.0
    activity_streak: int = 0
    last_interaction: Optional[int] = None


@dataclass
class ReputationSeries:
    """One value per calendar day, starting at ``start_day``."""

    user_id: int
    start_day: dt.date
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.values)

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_day + dt.timedelta(days=k) for k in range(len(self.values))]


def cumulative_component(basic_value: float, alpha: float, streak: int) -> float:
    """Streak bonus ``basic_value * alpha * (1 - 1/(streak + 1))``.

    Zero for a fresh streak; saturates strictly below ``basic_value * alpha``.
    """
    return basic_value * alpha * (1.0 - 1.0 / (streak + 1))


def delta_periods(t_prev: int, t_curr: int, params: ModelParams) -> int:
    """Number of whole activity periods between two instants."""
    gap = t_curr - t_prev
    if gap < 0:
        raise CorruptLogError(f"interaction at {t_curr} precedes previous one at {t_prev}")
    return int(gap // params.period_seconds)


def _step(trust, streak, last, timestamp, basic_value, params):
    if last is None:
        streak = 0
        decayed = 0.0
    else:
        delta = delta_periods(last, timestamp, params)
        streak = streak + 1 if delta == 0 else 0
        decayed = trust * params.beta ** delta
    interaction = basic_value + cumulative_component(basic_value, params.alpha, streak)
    trust = decayed + interaction
    if not math.isfinite(trust):
        raise NumericOverflowError(f"trust became {trust} at t={timestamp}")
    return trust, streak, timestamp


def apply_interaction(state: UserTrustState, event: InteractionEvent, params: ModelParams) -> UserTrustState:
    """Fold one interaction into a user's state and return the new state."""
    trust, streak, last = _step(
        state.trust, state.activity_streak, state.last_interaction,
        int(event.timestamp), float(event.basic_value), params,
    )
    return UserTrustState(trust, streak, last)


def reputation_at(state: UserTrustState, query: int, params: ModelParams) -> float:
    """Trust decayed from the last interaction to ``query`` without touching the state."""
    if state.last_interaction is None:
        return 0.0
    if query < state.last_interaction:
        raise InvalidQueryError(f"query {query} precedes last interaction {state.last_interaction}")
    return state.trust * params.beta ** delta_periods(state.last_interaction, query, params)


def trust_trajectory(timestamps: Sequence[int], basic_values: Sequence[float], params: ModelParams):
    """Trust and streak right after each interaction of one user.

    Returns two arrays aligned with ``timestamps``.
    """
    n = len(timestamps)
    trusts = np.empty(n, dtype=np.float64)
    streaks = np.empty(n, dtype=np.int64)
    trust, streak, last = 0.0, 0, None
    for k, (ts, bv) in enumerate(zip(np.asarray(timestamps).tolist(), np.asarray(basic_values, dtype=float).tolist())):
        trust, streak, last = _step(trust, streak, last, ts, bv, params)
        trusts[k] = trust
        streaks[k] = streak
    return trusts, streaks


def decayed_values(timestamps: np.ndarray, trusts: np.ndarray, queries: np.ndarray, params: ModelParams) -> np.ndarray:
    """Vectorised :func:`reputation_at` for sorted query instants.

    Interactions after a query instant do not contribute to it; instants
    before the first interaction evaluate to 0.
    """
    queries = np.asarray(queries, dtype=np.int64)
    out = np.zeros(len(queries), dtype=np.float64)
    if len(timestamps) == 0:
        return out
    ts = np.asarray(timestamps, dtype=np.int64)
    idx = np.searchsorted(ts, queries, side="right") - 1
    seen = idx >= 0
    last = ts[idx[seen]]
    period = params.period_seconds
    delta = (queries[seen] - last) // period
    delta = delta.astype(np.int64)
    # scalar pow per distinct exponent keeps results bit-identical to reputation_at
    uniq, inverse = np.unique(delta, return_inverse=True)
    powers = np.array([params.beta ** int(d) for d in uniq.tolist()], dtype=np.float64)
    out[seen] = trusts[idx[seen]] * powers[inverse]
    return out


def _check_sorted(timestamps: np.ndarray):
    if len(timestamps) > 1 and np.any(np.diff(timestamps) < 0):
        raise CorruptLogError("interaction log is not sorted by timestamp")


def daily_reputation_series(
    events: Iterable[InteractionEvent],
    params: ModelParams,
    window: Window,
    user_id: Optional[int] = None,
) -> ReputationSeries:
    """Reputation at the end (23:59:59 UTC) of each day in ``window``.

    ``events`` must belong to one user and be sorted by time. Events before
    the window still shape the state; events after it are ignored.
    """
    events = list(events)
    users = {e.user_id for e in events}
    if len(users) > 1:
        raise ValueError(f"events span several users: {sorted(users)}")
    if user_id is None:
        user_id = users.pop() if users else 0
    elif users and users != {user_id}:
        raise ValueError(f"events belong to user {users.pop()}, not {user_id}")
    ts = np.fromiter((e.timestamp for e in events), dtype=np.int64, count=len(events))
    bv = np.fromiter((e.basic_value for e in events), dtype=np.float64, count=len(events))
    return daily_series_from_arrays(ts, bv, params, window, user_id)


def daily_series_from_arrays(timestamps, basic_values, params: ModelParams, window: Window, user_id: int = 0) -> ReputationSeries:
    """Array-based twin of :func:`daily_reputation_series`."""
    ts = np.asarray(timestamps, dtype=np.int64)
    _check_sorted(ts)
    trusts, _ = trust_trajectory(ts, basic_values, params)
    values = decayed_values(ts, trusts, window.day_ends(), params)
    return ReputationSeries(int(user_id), window.start, values)


def historical_series(daily: ReputationSeries) -> ReputationSeries:
    """Running sum of daily values."""
    return ReputationSeries(daily.user_id, daily.start_day, np.cumsum(np.asarray(daily.values, dtype=np.float64)))
