"""Seeded generator of small Q&A communities.

Each user belongs to an activity class that fixes the distribution of gaps
between consecutive interactions:

* ``burst``: every gap is shorter than one activity period,
* ``sparse``: every gap spans at least one activity period,
* ``mixed``: each gap is drawn from one of the two at random.

Users join at a random time and most leave after an exponentially
distributed lifetime. Every post gets a few votes shortly after creation
plus a steady trickle for the rest of the window, both scaled by a
per-user quality factor, so the vote-based reference ranking tracks
activity without copying it.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import quoteattr

import numpy as np

from .ingest import CSV_FILES, DUMP_FILES, ENTITY_FIELDS, CommentTable, EventLog, PostTable
from .model import InteractionEvent, InteractionKind
from .so_sim import PostIndex, PostRecord, PostType, VoteEvent, VoteTable
from .timeutil import SECONDS_PER_DAY, Window, format_timestamp

CLASSES = ("burst", "sparse", "mixed")


@dataclass(frozen=True)
class GeneratorSpec:
    user_count: int
    window: Window
    class_weights: dict = field(default_factory=lambda: {"burst": 1.0, "sparse": 1.0, "mixed": 1.0})
    activity_period_days: float = 2.0
    votes_per_post: float = 0.5
    seed: int = 0
    min_gap_seconds: int = 60
    sparse_max_periods: float = 4.0
    mixed_burst_share: float = 0.5
    question_share: float = 0.3
    answer_share: float = 0.4
    join_span: float = 0.7
    leave_probability: float = 0.8
    mean_lifetime_days: float = 120.0
    vote_delay_days: float = 3.0
    tail_votes_per_year: float = 4.0

    def __post_init__(self):
        if self.user_count < 0:
            raise ValueError("user_count must be non-negative")
        weights = {k: float(v) for k, v in self.class_weights.items() if v > 0}
        if not weights or set(weights) - set(CLASSES):
            raise ValueError(f"class_weights needs positive weights over {CLASSES}, got {self.class_weights}")
        rates = (self.votes_per_post, self.tail_votes_per_year, self.activity_period_days,
                 self.sparse_max_periods, self.vote_delay_days, self.mean_lifetime_days)
        if not all(np.isfinite(r) and r >= 0 for r in rates) or self.activity_period_days <= 0:
            raise ValueError("rates must be finite and non-negative")
        if self.sparse_max_periods < 1:
            raise ValueError("sparse_max_periods must be at least 1")
        if not 0 <= self.mixed_burst_share <= 1 or not 0 <= self.leave_probability <= 1:
            raise ValueError("mixed_burst_share and leave_probability must lie in [0, 1]")
        if self.question_share + self.answer_share > 1:
            raise ValueError("question_share + answer_share exceeds 1")

    @property
    def period_seconds(self) -> int:
        return int(round(self.activity_period_days * SECONDS_PER_DAY))


@dataclass
class SyntheticCommunity:
    window: Window
    events: list  # InteractionEvent, sorted by (timestamp, kind, id)
    posts: list  # PostRecord, sorted by id
    votes: list  # VoteEvent, sorted by (timestamp, id)
    classes: dict  # user id -> class label
    comment_ids: list = field(default_factory=list)

    @property
    def users(self) -> list[int]:
        return sorted(self.classes)

    def event_log(self) -> EventLog:
        return EventLog.from_events(self.events)

    def post_table(self) -> PostTable:
        ts = {e.source_id: e.timestamp for e in self.events if e.kind is not InteractionKind.COMMENT}
        return PostTable(
            np.array([p.post_id for p in self.posts], dtype=np.int64),
            np.array([p.author_id for p in self.posts], dtype=np.int64),
            np.array([int(p.post_type) for p in self.posts], dtype=np.int64),
            np.array([p.parent_id if p.parent_id is not None else -1 for p in self.posts], dtype=np.int64),
            np.array([ts[p.post_id] for p in self.posts], dtype=np.int64),
        )

    def comment_table(self) -> CommentTable:
        comments = [e for e in self.events if e.kind is InteractionKind.COMMENT]
        return CommentTable(
            np.array([e.source_id for e in comments], dtype=np.int64),
            np.array([e.user_id for e in comments], dtype=np.int64),
            np.array([e.timestamp for e in comments], dtype=np.int64),
        )

    def post_index(self) -> PostIndex:
        return PostIndex.from_records(self.posts)

    def vote_table(self) -> VoteTable:
        return VoteTable.from_events(self.votes)

    def _rows(self):
        for p in self.posts:
            row = {"Id": p.post_id, "CreationDate": format_timestamp(p.timestamp) + ".000",
                   "PostTypeId": int(p.post_type), "OwnerUserId": p.author_id}
            if p.parent_id is not None:
                row["ParentId"] = p.parent_id
            yield "post", row
        for e in self.events:
            if e.kind is InteractionKind.COMMENT:
                yield "comment", {"Id": e.source_id, "CreationDate": format_timestamp(e.timestamp) + ".000", "UserId": e.user_id}
        for v in self.votes:
            yield "vote", {"Id": v.vote_id, "CreationDate": format_timestamp(v.timestamp) + ".000",
                           "VoteTypeId": v.vote_type, "PostId": v.post_id}

    def write_csv(self, directory) -> dict:
        """Write ``posts.csv``, ``comments.csv`` and ``votes.csv`` in the ingest format."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        handles = {e: open(directory / CSV_FILES[e], "w", newline="", encoding="utf-8") for e in ("post", "comment", "vote")}
        counts = dict.fromkeys(handles, 0)
        try:
            writers = {e: csv.writer(fh, lineterminator="\n") for e, fh in handles.items()}
            for e, w in writers.items():
                w.writerow(ENTITY_FIELDS[e])
            for entity, row in self._rows():
                writers[entity].writerow([row.get(c, "") for c in ENTITY_FIELDS[entity]])
                counts[entity] += 1
        finally:
            for fh in handles.values():
                fh.close()
        return counts

    def write_xml(self, directory) -> dict:
        """Write ``Posts.xml``, ``Comments.xml`` and ``Votes.xml`` in the dump format."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        roots = {"post": "posts", "comment": "comments", "vote": "votes"}
        handles = {e: open(directory / DUMP_FILES[e], "w", encoding="utf-8") for e in roots}
        counts = dict.fromkeys(handles, 0)
        try:
            for e, fh in handles.items():
                fh.write(f'<?xml version="1.0" encoding="utf-8"?>\n<{roots[e]}>\n')
            for entity, row in self._rows():
                attrs = " ".join(f"{k}={quoteattr(str(v))}" for k, v in row.items())
                handles[entity].write(f"  <row {attrs} />\n")
                counts[entity] += 1
            for e, fh in handles.items():
                fh.write(f"</{roots[e]}>\n")
        finally:
            for fh in handles.values():
                fh.close()
        return counts


def _gap(rng, label: str, spec: GeneratorSpec) -> int:
    period = spec.period_seconds
    if label == "mixed":
        label = "burst" if rng.random() < spec.mixed_burst_share else "sparse"
    if label == "burst":
        return int(rng.integers(spec.min_gap_seconds, max(period, spec.min_gap_seconds + 1)))
    return int(rng.integers(period, max(int(spec.sparse_max_periods * period), period) + 1))


def generate(spec: GeneratorSpec) -> SyntheticCommunity:
    """Build a community; identical specs give identical logs."""
    rng = np.random.default_rng(spec.seed)
    window = spec.window
    t0, t1 = window.first_second(), window.last_second()
    span = t1 - t0
    labels = sorted(spec.class_weights)
    weights = np.array([spec.class_weights[k] for k in labels], dtype=float)
    weights = weights / weights.sum()

    raw = []  # (timestamp, user, kind code)
    classes, quality = {}, {}
    for uid in range(1, spec.user_count + 1):
        label = labels[int(rng.choice(len(labels), p=weights))]
        classes[uid] = label
        quality[uid] = float(rng.lognormal(0.0, 0.5))
        t = t0 + int(rng.integers(0, max(int(span * spec.join_span), 1)))
        stop = t1
        if rng.random() < spec.leave_probability:
            if spec.mean_lifetime_days > 0:
                stop = min(t1, t + int(rng.exponential(spec.mean_lifetime_days * SECONDS_PER_DAY)))
            else:
                stop = int(rng.integers(t, t1 + 1))
        while t <= stop:
            u = rng.random()
            kind = 0 if u < spec.question_share else (1 if u < spec.question_share + spec.answer_share else 2)
            raw.append((t, uid, kind))
            t += _gap(rng, label, spec)

    raw.sort()
    events, posts, questions, comment_ids = [], [], [], []
    next_post = next_comment = 1
    for t, uid, kind in raw:
        if kind == 1 and not questions:
            kind = 0
        if kind == 2:
            events.append(InteractionEvent(uid, t, InteractionKind.COMMENT, 1.0, next_comment))
            comment_ids.append(next_comment)
            next_comment += 1
            continue
        if kind == 0:
            posts.append(PostRecord(next_post, uid, PostType.QUESTION, None, t))
            questions.append(next_post)
            events.append(InteractionEvent(uid, t, InteractionKind.QUESTION, 1.0, next_post))
        else:
            parent = questions[int(rng.integers(0, len(questions)))]
            posts.append(PostRecord(next_post, uid, PostType.ANSWER, parent, t))
            events.append(InteractionEvent(uid, t, InteractionKind.ANSWER, 1.0, next_post))
        next_post += 1

    raw_votes = []
    delay_scale = spec.vote_delay_days * SECONDS_PER_DAY
    for p in posts:
        q = quality[p.author_id]
        times = []
        for _ in range(int(rng.poisson(spec.votes_per_post * q))):
            times.append(p.timestamp + (int(rng.exponential(delay_scale)) if delay_scale else 0))
        # slow steady trickle on old posts, uniform over the rest of the window
        remaining = t1 - p.timestamp
        n_tail = int(rng.poisson(spec.tail_votes_per_year * q * remaining / (365 * SECONDS_PER_DAY)))
        times.extend(int(x) for x in rng.integers(p.timestamp, t1 + 1, size=n_tail))
        for t in times:
            if t > t1:
                continue
            u = rng.random()
            if p.post_type is PostType.ANSWER:
                vtype = 1 if u < 0.1 else (2 if u < 0.85 else (3 if u < 0.95 else 5))
            else:
                vtype = 2 if u < 0.8 else (3 if u < 0.92 else 5)
            raw_votes.append((t, p.post_id, vtype))
    raw_votes.sort()
    votes = [VoteEvent(k, pid, vt, t) for k, (t, pid, vt) in enumerate(raw_votes, 1)]
    return SyntheticCommunity(window, events, posts, votes, classes, comment_ids)


def community_spec(user_count: int = 500, days: int = 365, seed: int = 0, start="2010-01-01", **overrides) -> GeneratorSpec:
    """Spec for a community of ``user_count`` users over ``days`` days."""
    first = dt.date.fromisoformat(start) if isinstance(start, str) else start
    window = Window(first, first + dt.timedelta(days=days - 1))
    return GeneratorSpec(user_count=user_count, window=window, seed=seed, **overrides)
