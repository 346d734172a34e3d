"""Input coercion shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .ingest import EventLog
from .model import InteractionEvent, InteractionKind
from .so_sim import VoteEvent, VoteTable
from .timeutil import Window


def check_events(X, basic_value: float = 1.0) -> EventLog:
    """Coerce ``X`` into an :class:`EventLog`.

    Accepted forms: an ``EventLog``; a sequence of
    :class:`InteractionEvent`; a DataFrame with ``user_id``, ``timestamp``
    and optional ``basic_value`` columns; or an array of shape
    ``(n, 2)`` / ``(n, 3)`` holding the same columns in that order.
    Timestamps are integer seconds since the epoch (UTC).
    """
    if isinstance(X, EventLog):
        return X
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], InteractionEvent):
        return EventLog.from_events(X)
    if hasattr(X, "columns") and "user_id" in X.columns:
        cols = ["user_id", "timestamp"] + (["basic_value"] if "basic_value" in X.columns else [])
        X = X[cols].to_numpy()
    if isinstance(X, (list, tuple)) and not X:
        X = np.empty((0, 2))
    arr = check_array(X, dtype=np.float64, ensure_min_samples=0, ensure_all_finite=True)
    if arr.shape[1] not in (2, 3):
        raise ValueError(f"event arrays need 2 or 3 columns (user_id, timestamp[, basic_value]), got {arr.shape[1]}")
    users = arr[:, 0].astype(np.int64)
    ts = arr[:, 1].astype(np.int64)
    if np.any(users != arr[:, 0]) or np.any(ts != arr[:, 1]):
        raise ValueError("user ids and timestamps must be integers")
    values = arr[:, 2] if arr.shape[1] == 3 else np.full(len(arr), float(basic_value))
    if np.any(values < 0):
        raise ValueError("basic values must be non-negative")
    events = [
        InteractionEvent(u, t, InteractionKind.COMMENT, v, k)
        for k, (u, t, v) in enumerate(zip(users.tolist(), ts.tolist(), values.tolist()))
    ]
    return EventLog.from_events(events)


def check_votes(X) -> VoteTable:
    if isinstance(X, VoteTable):
        return X
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], VoteEvent):
        return VoteTable.from_events(X)
    if isinstance(X, (list, tuple)) and not X:
        return VoteTable([], [], [], [])
    arr = check_array(X, dtype=np.int64, ensure_min_samples=0)
    if arr.shape[1] != 4:
        raise ValueError("vote arrays need columns (vote_id, post_id, vote_type, timestamp)")
    return VoteTable(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def check_window(start, end, *timestamp_arrays) -> Window:
    """Window from explicit bounds, filling gaps from the data's time span."""
    if start is not None and end is not None:
        return Window(start, end)
    arrays = [np.asarray(a) for a in timestamp_arrays if len(a)]
    if not arrays:
        raise ValueError("no explicit window and no timestamps to infer one from")
    inferred = Window.covering(np.concatenate(arrays))
    return Window(start if start is not None else inferred.start, end if end is not None else inferred.end)


def check_users(users, *candidates) -> np.ndarray:
    if users is not None:
        return np.unique(np.asarray(list(users), dtype=np.int64))
    arrays = [np.asarray(c, dtype=np.int64) for c in candidates]
    return np.unique(np.concatenate(arrays)) if arrays else np.zeros(0, dtype=np.int64)
