"""Streaming ingest of StackOverflow-style XML dumps.

Dump files hold one ``<row .../>`` element per entity under a single root.
Rows are parsed one at a time and the tree is cleared as we go, so memory
stays flat no matter how large the file is. Only the attributes needed for
reputation computations are kept.
"""

from __future__ import annotations

import csv
import logging
import math
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .exceptions import IngestQualityError, SamplingError
from .model import InteractionEvent, InteractionKind
from .so_sim import PostIndex, PostType, VoteTable
from .timeutil import parse_timestamp

logger = logging.getLogger(__name__)

ENTITY_FIELDS = {
    "post": ("Id", "CreationDate", "PostTypeId", "ParentId", "OwnerUserId"),
    "comment": ("Id", "CreationDate", "UserId"),
    "vote": ("Id", "CreationDate", "VoteTypeId", "PostId"),
    "user": ("Id", "CreationDate", "Reputation"),
}
_REQUIRED = {
    "post": ("Id", "CreationDate", "PostTypeId"),
    "comment": ("Id", "CreationDate"),
    "vote": ("Id", "CreationDate", "VoteTypeId", "PostId"),
    "user": ("Id", "CreationDate", "Reputation"),
}
_INT_FIELDS = {"Id", "PostTypeId", "ParentId", "OwnerUserId", "UserId", "VoteTypeId", "PostId", "Reputation"}
_AUTHOR_FIELD = {"post": "OwnerUserId", "comment": "UserId"}

DUMP_FILES = {"post": "Posts.xml", "comment": "Comments.xml", "vote": "Votes.xml", "user": "Users.xml"}
CSV_FILES = {"post": "posts.csv", "comment": "comments.csv", "vote": "votes.csv", "user": "users.csv"}


@dataclass(frozen=True)
class DumpRecord:
    entity: str
    attributes: dict

    def __getitem__(self, key):
        return self.attributes[key]

    def get(self, key, default=None):
        return self.attributes.get(key, default)

    def key(self):
        """Hashable form used for multiset comparisons."""
        return (self.entity, tuple(sorted(self.attributes.items())))


@dataclass
class ParseStats:
    entity: str = ""
    rows: int = 0
    emitted: int = 0
    malformed: int = 0
    dropped: int = 0
    filtered: int = 0
    reasons: Counter = field(default_factory=Counter)

    @property
    def malformed_fraction(self) -> float:
        return self.malformed / self.rows if self.rows else 0.0

    def summary(self) -> str:
        return (
            f"{self.entity}: rows={self.rows} emitted={self.emitted} malformed={self.malformed} "
            f"dropped={self.dropped} filtered={self.filtered}"
        )


def _check_row(entity: str, attrs: dict):
    """Return (kept attributes, outcome) where outcome is None, 'dropped', 'filtered' or a malformation reason."""
    for name in _REQUIRED[entity]:
        if not attrs.get(name):
            return None, f"missing {name}"
    kept = {}
    for name in ENTITY_FIELDS[entity]:
        value = attrs.get(name)
        if value is None or value == "":
            continue
        if name in _INT_FIELDS:
            try:
                int(value)
            except ValueError:
                return None, f"bad {name}"
        kept[name] = value
    try:
        parse_timestamp(kept["CreationDate"])
    except ValueError:
        return None, "bad CreationDate"

    if entity == "post":
        ptype = int(kept["PostTypeId"])
        if ptype not in (1, 2):
            return None, "filtered"
        if ptype == 2 and "ParentId" not in kept:
            return None, "missing ParentId"
        if ptype == 1:
            kept.pop("ParentId", None)
    elif entity == "vote":
        if not 0 <= int(kept["VoteTypeId"]) <= 9:
            return None, "filtered"
    author = _AUTHOR_FIELD.get(entity)
    if author is not None and author not in kept:
        return None, "dropped"
    return kept, None


def parse_dump(entity: str, source, max_skip_fraction: float = 0.01, stats: Optional[ParseStats] = None) -> Iterator[DumpRecord]:
    """Yield the rows of one dump file as :class:`DumpRecord` objects.

    ``source`` is a path or a binary file object. Malformed rows are skipped
    and counted in ``stats``; once the stream is exhausted an
    :class:`IngestQualityError` is raised if they exceed
    ``max_skip_fraction`` of all rows. Rows without an author (deleted or
    community-owned content) are counted as dropped, post types other than
    question/answer and vote types outside 0..9 as filtered; neither counts
    towards the threshold.
    """
    if entity not in ENTITY_FIELDS:
        raise ValueError(f"unknown entity {entity!r}")
    stats = stats if stats is not None else ParseStats()
    stats.entity = entity
    if isinstance(source, (str, Path)):
        source = str(source)
    root = None
    try:
        for event, elem in ET.iterparse(source, events=("start", "end")):
            if event == "start":
                if root is None:
                    root = elem
                continue
            if elem is root or elem.tag != "row":
                continue
            stats.rows += 1
            kept, outcome = _check_row(entity, elem.attrib)
            root.clear()
            if outcome is None:
                stats.emitted += 1
                yield DumpRecord(entity, kept)
            elif outcome == "dropped":
                stats.dropped += 1
            elif outcome == "filtered":
                stats.filtered += 1
            else:
                stats.malformed += 1
                stats.reasons[outcome] += 1
    except ET.ParseError as exc:
        raise IngestQualityError(f"unreadable {entity} dump: {exc}", stats) from exc
    logger.info(stats.summary())
    if stats.malformed_fraction > max_skip_fraction:
        raise IngestQualityError(
            f"{stats.malformed} of {stats.rows} {entity} rows malformed "
            f"({stats.malformed_fraction:.2%} > {max_skip_fraction:.2%}): {dict(stats.reasons)}",
            stats,
        )


def convert_to_csv(records: Iterable[DumpRecord], output, entity: str) -> int:
    """Write records of one entity kind as CSV; returns the number of data rows.

    ``output`` is a path or a text file object opened with ``newline=""``.
    """
    columns = ENTITY_FIELDS[entity]
    own = isinstance(output, (str, Path))
    fh = open(output, "w", newline="", encoding="utf-8") if own else output
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        count = 0
        for rec in records:
            if rec.entity != entity:
                raise ValueError(f"mixed entities: expected {entity}, got {rec.entity}")
            writer.writerow([rec.attributes.get(c, "") for c in columns])
            count += 1
        return count
    finally:
        if own:
            fh.close()


def read_csv(entity: str, source) -> Iterator[DumpRecord]:
    """Inverse of :func:`convert_to_csv`; empty cells become absent attributes."""
    own = isinstance(source, (str, Path))
    fh = open(source, newline="", encoding="utf-8") if own else source
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return
        if tuple(header) != ENTITY_FIELDS[entity]:
            raise ValueError(f"unexpected {entity} CSV header {header}")
        for row in reader:
            yield DumpRecord(entity, {k: v for k, v in zip(header, row) if v != ""})
    finally:
        if own:
            fh.close()


def ingest_file(entity: str, xml_path, csv_path, max_skip_fraction: float = 0.01) -> ParseStats:
    stats = ParseStats()
    convert_to_csv(parse_dump(entity, xml_path, max_skip_fraction, stats), csv_path, entity)
    return stats


# columnar tables ----------------------------------------------------------


@dataclass
class PostTable:
    post_ids: np.ndarray
    author_ids: np.ndarray
    post_types: np.ndarray
    parent_ids: np.ndarray  # -1 for questions
    timestamps: np.ndarray

    def __len__(self):
        return len(self.post_ids)

    def index(self) -> PostIndex:
        return PostIndex(self.post_ids, self.author_ids, self.post_types)

    @classmethod
    def from_records(cls, records: Iterable[DumpRecord]) -> "PostTable":
        cols = ([], [], [], [], [])
        for r in records:
            a = r.attributes
            cols[0].append(int(a["Id"]))
            cols[1].append(int(a["OwnerUserId"]))
            cols[2].append(int(a["PostTypeId"]))
            cols[3].append(int(a.get("ParentId", -1)))
            cols[4].append(parse_timestamp(a["CreationDate"]))
        return cls(*(np.array(c, dtype=np.int64) for c in cols))


@dataclass
class CommentTable:
    comment_ids: np.ndarray
    author_ids: np.ndarray
    timestamps: np.ndarray

    def __len__(self):
        return len(self.comment_ids)

    @classmethod
    def from_records(cls, records: Iterable[DumpRecord]) -> "CommentTable":
        cols = ([], [], [])
        for r in records:
            a = r.attributes
            cols[0].append(int(a["Id"]))
            cols[1].append(int(a["UserId"]))
            cols[2].append(parse_timestamp(a["CreationDate"]))
        return cls(*(np.array(c, dtype=np.int64) for c in cols))


@dataclass
class UserTable:
    user_ids: np.ndarray
    reputation: np.ndarray
    timestamps: np.ndarray

    @classmethod
    def from_records(cls, records: Iterable[DumpRecord]) -> "UserTable":
        cols = ([], [], [])
        for r in records:
            a = r.attributes
            cols[0].append(int(a["Id"]))
            cols[1].append(int(a["Reputation"]))
            cols[2].append(parse_timestamp(a["CreationDate"]))
        return cls(*(np.array(c, dtype=np.int64) for c in cols))

    def as_dict(self) -> dict:
        return dict(zip(self.user_ids.tolist(), self.reputation.tolist()))


def votes_from_records(records: Iterable[DumpRecord]) -> VoteTable:
    """Vote table sorted by (timestamp, vote id)."""
    cols = ([], [], [], [])
    for r in records:
        a = r.attributes
        cols[0].append(int(a["Id"]))
        cols[1].append(int(a["PostId"]))
        cols[2].append(int(a["VoteTypeId"]))
        cols[3].append(parse_timestamp(a["CreationDate"]))
    table = VoteTable(*cols)
    order = np.lexsort((table.vote_ids, table.timestamps))
    return VoteTable(table.vote_ids[order], table.post_ids[order], table.vote_types[order], table.timestamps[order])


def load_table(entity: str, path):
    """Read a converted CSV file into its columnar table."""
    records = read_csv(entity, path)
    if entity == "post":
        return PostTable.from_records(records)
    if entity == "comment":
        return CommentTable.from_records(records)
    if entity == "vote":
        return votes_from_records(records)
    if entity == "user":
        return UserTable.from_records(records)
    raise ValueError(f"unknown entity {entity!r}")


# event log ---------------------------------------------------------------

_KIND_CODES = (InteractionKind.QUESTION, InteractionKind.ANSWER, InteractionKind.COMMENT)


@dataclass
class EventLog:
    """Interactions of all users, sorted by (user, time, post-before-comment, id).

    Events of user ``users[k]`` occupy ``offsets[k]:offsets[k + 1]``.
    """

    user_ids: np.ndarray
    timestamps: np.ndarray
    kinds: np.ndarray
    source_ids: np.ndarray
    basic_values: np.ndarray
    posts_retained: int = 0
    comments_retained: int = 0
    dropped_invalid_user: int = 0

    def __post_init__(self):
        self.users, starts = np.unique(self.user_ids, return_index=True)
        self.offsets = np.append(starts, len(self.user_ids)).astype(np.int64)

    def __len__(self):
        return len(self.user_ids)

    def _bounds(self, user_id: int):
        k = int(np.searchsorted(self.users, user_id))
        if k >= len(self.users) or self.users[k] != user_id:
            return 0, 0
        return int(self.offsets[k]), int(self.offsets[k + 1])

    def slice(self, user_id: int):
        """Timestamps and basic values of one user's events (empty if unknown)."""
        lo, hi = self._bounds(user_id)
        return self.timestamps[lo:hi], self.basic_values[lo:hi]

    def events(self, user_id: int) -> list[InteractionEvent]:
        lo, hi = self._bounds(user_id)
        return [
            InteractionEvent(int(user_id), ts, _KIND_CODES[k], bv, sid)
            for ts, k, bv, sid in zip(
                self.timestamps[lo:hi].tolist(), self.kinds[lo:hi].tolist(),
                self.basic_values[lo:hi].tolist(), self.source_ids[lo:hi].tolist(),
            )
        ]

    def counts(self) -> dict:
        return dict(zip(self.users.tolist(), np.diff(self.offsets).tolist()))

    @classmethod
    def from_events(cls, events: Iterable[InteractionEvent]) -> "EventLog":
        events = list(events)
        kinds = np.array([_KIND_CODES.index(InteractionKind(e.kind)) for e in events], dtype=np.int64)
        return cls._sorted(
            np.array([e.user_id for e in events], dtype=np.int64),
            np.array([e.timestamp for e in events], dtype=np.int64),
            kinds,
            np.array([e.source_id for e in events], dtype=np.int64),
            np.array([e.basic_value for e in events], dtype=np.float64),
            posts_retained=int((kinds < 2).sum()),
            comments_retained=int((kinds == 2).sum()),
        )

    @classmethod
    def _sorted(cls, users, ts, kinds, ids, values, **counts) -> "EventLog":
        order = np.lexsort((ids, kinds == 2, ts, users))
        return cls(users[order], ts[order], kinds[order], ids[order], values[order], **counts)


def build_event_log(posts, comments, basic_value: float = 1.0, kind_values: Optional[dict] = None) -> EventLog:
    """Merge posts and comments into per-user, time-ordered interaction lists.

    ``posts``/``comments`` may be record streams or :class:`PostTable` /
    :class:`CommentTable`. Every interaction is worth ``basic_value`` unless
    ``kind_values`` maps its :class:`InteractionKind` to another value.
    Records whose author id is not a positive integer are dropped and
    counted in ``dropped_invalid_user``.
    """
    if not isinstance(posts, PostTable):
        posts = PostTable.from_records(posts)
    if not isinstance(comments, CommentTable):
        comments = CommentTable.from_records(comments)
    users = np.concatenate([posts.author_ids, comments.author_ids])
    ts = np.concatenate([posts.timestamps, comments.timestamps])
    kinds = np.concatenate([np.where(posts.post_types == int(PostType.QUESTION), 0, 1), np.full(len(comments), 2)]).astype(np.int64)
    ids = np.concatenate([posts.post_ids, comments.comment_ids])
    values = np.full(len(users), float(basic_value))
    for kind, value in (kind_values or {}).items():
        values[kinds == _KIND_CODES.index(InteractionKind(kind))] = float(value)
    valid = users > 0
    dropped = int((~valid).sum())
    post_mask = valid[: len(posts)]
    log = EventLog._sorted(
        users[valid], ts[valid], kinds[valid], ids[valid], values[valid],
        posts_retained=int(post_mask.sum()),
        comments_retained=int(valid[len(posts):].sum()),
        dropped_invalid_user=dropped,
    )
    logger.info(
        "event log: %d users, %d posts, %d comments, %d dropped",
        len(log.users), log.posts_retained, log.comments_retained, dropped,
    )
    return log


# stratified sampling -----------------------------------------------------


@dataclass(frozen=True)
class SamplingSpec:
    bucket_count: int = 10
    per_bucket: int = 1500
    seed: int = 0
    # "error" follows the strict contract; "take_all" keeps every user of a thin bucket
    on_deficient: str = "error"

    def __post_init__(self):
        if self.bucket_count < 1 or self.per_bucket < 1:
            raise ValueError("bucket_count and per_bucket must be positive")
        if self.on_deficient not in ("error", "take_all"):
            raise ValueError(f"on_deficient must be 'error' or 'take_all', got {self.on_deficient!r}")


def bucket_edges(values, bucket_count: int) -> np.ndarray:
    """``bucket_count + 1`` equal-width edges spanning ``[min, max]``."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    width = (hi - lo) / bucket_count
    edges = lo + width * np.arange(bucket_count + 1)
    edges[-1] = hi
    return edges


def assign_buckets(values, bucket_count: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    width = (hi - lo) / bucket_count
    if width == 0:
        return np.zeros(len(values), dtype=np.int64)
    idx = np.floor((values - lo) / width).astype(np.int64)
    return np.clip(idx, 0, bucket_count - 1)


def stratified_sample(final_reputation, spec: SamplingSpec) -> list[int]:
    """Draw ``per_bucket`` users from each of ``bucket_count`` equal-width reputation intervals.

    ``final_reputation`` maps user id to value. Returns the sorted union of
    the per-bucket draws.
    """
    if isinstance(final_reputation, dict):
        ids = np.array(sorted(final_reputation), dtype=np.int64)
        values = np.array([final_reputation[u] for u in ids.tolist()], dtype=np.float64)
    else:
        ids, values = (np.asarray(x) for x in final_reputation)
        order = np.argsort(ids, kind="stable")
        ids, values = ids[order].astype(np.int64), values[order].astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise SamplingError("non-finite reputation values")
    need = spec.bucket_count * spec.per_bucket
    if len(ids) < need and spec.on_deficient == "error":
        raise SamplingError(f"{need} users requested but only {len(ids)} candidates")
    if len(ids) == 0:
        return []
    buckets = assign_buckets(values, spec.bucket_count)
    occupancy = np.bincount(buckets, minlength=spec.bucket_count)
    thin = np.flatnonzero(occupancy < spec.per_bucket)
    if len(thin) and spec.on_deficient == "error":
        report = ", ".join(f"bucket {b}: {occupancy[b]}" for b in range(spec.bucket_count))
        raise SamplingError(
            f"bucket {int(thin[0])} holds {int(occupancy[thin[0]])} < {spec.per_bucket} users ({report})",
            occupancy.tolist(),
        )
    rng = np.random.default_rng(spec.seed)
    chosen = []
    for b in range(spec.bucket_count):
        members = ids[buckets == b]
        take = min(spec.per_bucket, len(members))
        if take:
            chosen.append(rng.choice(members, size=take, replace=False))
    return sorted(np.concatenate(chosen).tolist()) if chosen else []


def write_sample(user_ids: Iterable[int], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("".join(f"{int(u)}\n" for u in user_ids), encoding="utf-8")


def read_sample(path) -> list[int]:
    return [int(line) for line in Path(path).read_text(encoding="utf-8").split() if line.strip()]


def dataset_window_bounds(*timestamp_arrays) -> tuple[int, int]:
    arrays = [np.asarray(a) for a in timestamp_arrays if len(a)]
    if not arrays:
        raise ValueError("no timestamps")
    return int(min(a.min() for a in arrays)), int(max(a.max() for a in arrays))


def reputation_divergence(simulated: dict, snapshot: dict) -> dict:
    """Compare simulated final totals with a dump-provided reputation column."""
    common = sorted(set(simulated) & set(snapshot))
    if not common:
        return {"users": 0, "mean_abs_diff": math.nan, "max_abs_diff": math.nan, "exact_matches": 0}
    diff = np.abs(np.array([simulated[u] for u in common], float) - np.array([snapshot[u] for u in common], float))
    return {
        "users": len(common),
        "mean_abs_diff": float(diff.mean()),
        "max_abs_diff": float(diff.max()),
        "exact_matches": int((diff == 0).sum()),
    }
