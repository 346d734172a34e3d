"""Vote-driven reputation simulation in the style of StackOverflow.

Votes are credited to the author of the voted post through a rule table
mapping ``(vote_type, post_type)`` to a reputation delta. Totals only move
when votes arrive; nothing decays.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .exceptions import ConfigurationError, CorruptLogError
from .series import SeriesMatrix
from .timeutil import SECONDS_PER_DAY, Window

logger = logging.getLogger(__name__)


class PostType(enum.IntEnum):
    QUESTION = 1
    ANSWER = 2

    @classmethod
    def parse(cls, text: str) -> "PostType":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ConfigurationError(f"unknown post type {text!r}") from None


@dataclass(frozen=True)
class VoteEvent:
    vote_id: int
    post_id: int
    vote_type: int
    timestamp: int

    def __post_init__(self):
        if not 0 <= self.vote_type <= 9:
            raise ValueError(f"vote_type must lie in 0..9, got {self.vote_type}")


@dataclass(frozen=True)
class PostRecord:
    post_id: int
    author_id: int
    post_type: PostType
    parent_id: Optional[int] = None
    timestamp: int = 0

    def __post_init__(self):
        if self.post_type is PostType.ANSWER and self.parent_id is None:
            raise ValueError(f"answer {self.post_id} has no parent question")
        if self.post_type is PostType.QUESTION and self.parent_id is not None:
            raise ValueError(f"question {self.post_id} cannot have a parent")


IGNORE = None

_DEFAULT_RULES = """
# accepted answer
1.answer = 15
1.question = 0
# upvote
2.question = 5
2.answer = 10
# downvote
3.question = -2
3.answer = -2
0 = ignore
4 = ignore
5 = ignore
6 = ignore
7 = ignore
8 = ignore
9 = ignore
floor = 1
daily_cap = off
"""

_LINE = re.compile(r"^\s*(\d+)(?:\.(\w+))?\s*=\s*(\S+)\s*$")


@dataclass
class ReputationRuleTable:
    """Reputation deltas per ``(vote_type, post_type)``.

    ``floor`` keeps a credited user's total from dropping below it
    (``None`` disables); ``daily_cap`` limits the net gain per user per day
    (``None`` disables).
    """

    deltas: dict = field(default_factory=dict)
    ignored: frozenset = frozenset()
    floor: Optional[int] = 1
    daily_cap: Optional[int] = None

    def __post_init__(self):
        clash = {vt for vt, _ in self.deltas} & set(self.ignored)
        if clash:
            raise ConfigurationError(f"vote types both scored and ignored: {sorted(clash)}")

    def delta(self, vote_type: int, post_type: PostType):
        """Delta for the post author, or ``IGNORE`` for ignored vote types."""
        if vote_type in self.ignored:
            return IGNORE
        try:
            return self.deltas[(int(vote_type), PostType(post_type))]
        except KeyError:
            raise ConfigurationError(
                f"no rule for vote type {vote_type} on a {PostType(post_type).name.lower()}"
            ) from None

    def lookup_arrays(self):
        """Dense ``(10, 3)`` delta table, a matching 'known' mask and an 'ignored' mask."""
        table = np.zeros((10, 3), dtype=np.int64)
        known = np.zeros((10, 3), dtype=bool)
        ignored = np.zeros(10, dtype=bool)
        for (vt, pt), d in self.deltas.items():
            table[vt, int(pt)] = d
            known[vt, int(pt)] = True
        for vt in self.ignored:
            ignored[vt] = True
        return table, known, ignored

    @classmethod
    def default(cls) -> "ReputationRuleTable":
        return cls.parse(_DEFAULT_RULES)

    @classmethod
    def parse(cls, text: str) -> "ReputationRuleTable":
        deltas, ignored = {}, set()
        floor, cap = 1, None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = (part.strip() for part in line.partition("="))
            if key in ("floor", "daily_cap"):
                parsed = None if value.lower() in ("off", "none", "") else int(value)
                if key == "floor":
                    floor = parsed
                else:
                    cap = parsed
                continue
            m = _LINE.match(line)
            if m is None:
                raise ConfigurationError(f"rule line {lineno} not understood: {raw!r}")
            vote_type, post_type, value = int(m.group(1)), m.group(2), m.group(3)
            if not 0 <= vote_type <= 9:
                raise ConfigurationError(f"rule line {lineno}: vote type {vote_type} outside 0..9")
            if value.lower() == "ignore":
                if post_type is not None:
                    raise ConfigurationError(f"rule line {lineno}: ignore applies to a whole vote type")
                ignored.add(vote_type)
            else:
                if post_type is None:
                    raise ConfigurationError(f"rule line {lineno}: delta needs vote_type.post_type")
                deltas[(vote_type, PostType.parse(post_type))] = int(value)
        return cls(deltas, frozenset(ignored), floor, cap)

    @classmethod
    def from_file(cls, path) -> "ReputationRuleTable":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        lines = [f"{vt}.{pt.name.lower()} = {d}" for (vt, pt), d in sorted(self.deltas.items())]
        lines += [f"{vt} = ignore" for vt in sorted(self.ignored)]
        lines.append(f"floor = {'off' if self.floor is None else self.floor}")
        lines.append(f"daily_cap = {'off' if self.daily_cap is None else self.daily_cap}")
        return "\n".join(lines) + "\n"


@dataclass
class VoteStats:
    applied: int = 0
    ignored: int = 0
    unresolved: int = 0
    applied_delta_sum: int = 0

    @property
    def total(self) -> int:
        return self.applied + self.ignored + self.unresolved


class PostIndex:
    """Post id -> (author, post type) lookup, backed by sorted arrays."""

    def __init__(self, post_ids, author_ids, post_types):
        post_ids = np.asarray(post_ids, dtype=np.int64)
        order = np.argsort(post_ids, kind="stable")
        self.post_ids = post_ids[order]
        self.author_ids = np.asarray(author_ids, dtype=np.int64)[order]
        self.post_types = np.asarray(post_types, dtype=np.int64)[order]
        if len(self.post_ids) > 1 and np.any(np.diff(self.post_ids) == 0):
            raise ValueError("duplicate post ids in index")

    @classmethod
    def from_records(cls, posts: Iterable[PostRecord]) -> "PostIndex":
        posts = list(posts)
        return cls(
            [p.post_id for p in posts],
            [p.author_id for p in posts],
            [int(p.post_type) for p in posts],
        )

    def __len__(self):
        return len(self.post_ids)

    def lookup(self, post_ids):
        """Authors and post types for ``post_ids``; author ``-1`` marks a missing post."""
        post_ids = np.asarray(post_ids, dtype=np.int64)
        pos = np.searchsorted(self.post_ids, post_ids)
        pos_c = np.minimum(pos, max(len(self.post_ids) - 1, 0))
        if len(self.post_ids) == 0:
            return np.full(len(post_ids), -1, dtype=np.int64), np.zeros(len(post_ids), dtype=np.int64)
        hit = self.post_ids[pos_c] == post_ids
        authors = np.where(hit, self.author_ids[pos_c], -1)
        types = np.where(hit, self.post_types[pos_c], 0)
        return authors, types

    def get(self, post_id: int):
        authors, types = self.lookup([post_id])
        if authors[0] < 0:
            return None
        return int(authors[0]), PostType(int(types[0]))


@dataclass
class VoteTable:
    """Columnar vote log."""

    vote_ids: np.ndarray
    post_ids: np.ndarray
    vote_types: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        self.vote_ids = np.asarray(self.vote_ids, dtype=np.int64)
        self.post_ids = np.asarray(self.post_ids, dtype=np.int64)
        self.vote_types = np.asarray(self.vote_types, dtype=np.int64)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)

    @classmethod
    def from_events(cls, votes: Iterable[VoteEvent]) -> "VoteTable":
        votes = list(votes)
        return cls(
            [v.vote_id for v in votes], [v.post_id for v in votes],
            [v.vote_type for v in votes], [v.timestamp for v in votes],
        )

    def __len__(self):
        return len(self.vote_ids)

    def events(self) -> list[VoteEvent]:
        return [
            VoteEvent(*row)
            for row in zip(self.vote_ids.tolist(), self.post_ids.tolist(), self.vote_types.tolist(), self.timestamps.tolist())
        ]


def _clamp(total, rules: ReputationRuleTable):
    return total if rules.floor is None else max(rules.floor, total)


def apply_vote(totals: dict, vote: VoteEvent, posts, rules: ReputationRuleTable, stats: Optional[VoteStats] = None) -> dict:
    """Credit one vote to the author of the voted post; mutates and returns ``totals``.

    Votes on posts missing from ``posts`` are skipped and counted in
    ``stats.unresolved``.
    """
    stats = stats if stats is not None else VoteStats()
    target = _resolve(posts, vote.post_id)
    if target is None:
        stats.unresolved += 1
        return totals
    author, post_type = target
    d = rules.delta(vote.vote_type, post_type)
    if d is IGNORE:
        stats.ignored += 1
        return totals
    totals[author] = _clamp(totals.get(author, 0) + d, rules)
    stats.applied += 1
    stats.applied_delta_sum += d
    return totals


def _resolve(posts, post_id):
    if isinstance(posts, PostIndex):
        return posts.get(post_id)
    rec = posts.get(post_id)
    if rec is None:
        return None
    if isinstance(rec, PostRecord):
        return rec.author_id, rec.post_type
    return rec


def _as_vote_table(votes) -> VoteTable:
    return votes if isinstance(votes, VoteTable) else VoteTable.from_events(votes)


def _as_post_index(posts) -> PostIndex:
    if isinstance(posts, PostIndex):
        return posts
    if isinstance(posts, dict):
        posts = posts.values()
    return PostIndex.from_records(posts)


@dataclass
class SOSimulationResult:
    matrix: SeriesMatrix
    stats: VoteStats
    final_totals: dict


def daily_so_series(
    votes: Union[VoteTable, Iterable[VoteEvent]],
    posts,
    rules: Optional[ReputationRuleTable],
    window: Window,
    users=None,
) -> SOSimulationResult:
    """Simulated reputation of every user at the end of each day in ``window``.

    Votes are summed per user and calendar day before the optional cap and
    floor are applied, so the order of votes within a day never matters.
    Votes before the window contribute to the starting totals; later ones
    are ignored. ``users`` fixes the row set (defaults to every credited
    author).
    """
    rules = rules or ReputationRuleTable.default()
    votes = _as_vote_table(votes)
    index = _as_post_index(posts)
    ts = votes.timestamps
    if len(ts) > 1 and np.any(np.diff(ts) < 0):
        raise CorruptLogError("vote log is not sorted by timestamp")
    in_range = ts <= window.last_second()
    stats = VoteStats()

    authors, ptypes = index.lookup(votes.post_ids[in_range])
    vtypes = votes.vote_types[in_range]
    days = (ts[in_range] - window.first_second()) // SECONDS_PER_DAY
    if np.any((vtypes < 0) | (vtypes > 9)):
        raise ConfigurationError(f"vote types outside 0..9: {sorted(set(vtypes[(vtypes < 0) | (vtypes > 9)].tolist()))}")

    resolved = authors >= 0
    stats.unresolved = int((~resolved).sum())
    table, known, ignored_mask = rules.lookup_arrays()
    is_ignored = resolved & ignored_mask[vtypes]
    scored = resolved & ~is_ignored
    missing = scored & ~known[vtypes, ptypes]
    if missing.any():
        bad = sorted({(int(v), PostType(int(p)).name.lower()) for v, p in zip(vtypes[missing], ptypes[missing])})
        raise ConfigurationError(f"no rule for (vote_type, post_type) pairs {bad}")
    stats.ignored = int(is_ignored.sum())
    stats.applied = int(scored.sum())
    deltas = table[vtypes[scored], ptypes[scored]]
    stats.applied_delta_sum = int(deltas.sum())

    a, d = authors[scored], days[scored]
    if users is None:
        user_ids = np.unique(a)
    else:
        user_ids = np.unique(np.asarray(users, dtype=np.int64))
    n_days = window.days
    changes = np.zeros((len(user_ids), n_days + 1), dtype=np.int64)
    final_totals = {}

    if len(a):
        order = np.lexsort((d, a))
        a, d, deltas = a[order], d[order], deltas[order]
        boundary = np.flatnonzero((np.diff(a) != 0) | (np.diff(d) != 0)) + 1
        starts = np.concatenate(([0], boundary))
        g_user = a[starts]
        g_day = d[starts]
        g_sum = np.add.reduceat(deltas, starts)
        rows = np.searchsorted(user_ids, g_user)
        present = (rows < len(user_ids)) & (user_ids[np.minimum(rows, len(user_ids) - 1)] == g_user) if len(user_ids) else np.zeros(len(g_user), bool)
        cur_user, total = None, 0
        for uid, day, s, row, keep in zip(g_user.tolist(), g_day.tolist(), g_sum.tolist(), rows.tolist(), present.tolist()):
            if uid != cur_user:
                if cur_user is not None:
                    final_totals[cur_user] = total
                cur_user, total = uid, 0
            if rules.daily_cap is not None:
                s = min(s, rules.daily_cap)
            new_total = _clamp(total + s, rules)
            if keep:
                changes[row, max(day, 0)] += new_total - total
            total = new_total
        final_totals[cur_user] = total

    values = np.cumsum(changes[:, :n_days], axis=1).astype(np.float64)
    logger.debug("simulated %d votes: %s", len(votes), stats)
    return SOSimulationResult(SeriesMatrix(user_ids, window.start, values), stats, final_totals)
