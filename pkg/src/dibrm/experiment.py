"""Parameter sweeps: reference reputation vs. interaction-based reputation.

A run loads (or receives) posts, comments and votes, simulates the
vote-based reference series once, picks the evaluated users and then, for
every ``(activity_period_days, alpha, beta)`` grid point, scores the daily
and the running-sum interaction reputations against the reference.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .estimators import DIBRMReputation
from .exceptions import ConfigurationError
from .ingest import (
    CSV_FILES, EventLog, PostTable, SamplingSpec, build_event_log, load_table,
    read_sample, reputation_divergence, stratified_sample, write_sample,
)
from .metrics import compare_series
from .model import ModelParams
from .series import SeriesMatrix
from .so_sim import PostIndex, ReputationRuleTable, VoteStats, VoteTable, daily_so_series
from .timeutil import Window

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ("ta", "alpha", "beta", "mu_D", "sigma_D", "mu_H", "sigma_H")

GRID_PRESETS = {
    "activity": [(1, 1, 0.99), (2, 1, 0.99), (4, 1, 0.99), (8, 1, 0.99)],
    "forgetting": [(2, 1, 0.90), (2, 1, 0.99), (8, 1, 0.90), (8, 1, 0.99)],
    "cumulative": [(2, 1, 0.99), (2, 2, 0.99), (2, 4, 0.99), (2, 8, 0.99)],
}
GRID_PRESETS["all"] = list(dict.fromkeys(GRID_PRESETS["activity"] + GRID_PRESETS["forgetting"] + GRID_PRESETS["cumulative"]))


@dataclass
class SweepConfig:
    grid: list = field(default_factory=lambda: list(GRID_PRESETS["activity"]))
    window: Optional[Window] = None
    sample: Optional[SamplingSpec] = None
    sample_file: Optional[str] = None
    sample_source: str = "simulated"
    outputs: Optional[str] = None
    posts: Optional[str] = None
    comments: Optional[str] = None
    votes: Optional[str] = None
    users: Optional[str] = None
    rules: Optional[str] = None
    basic_value: float = 1.0
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if not self.grid:
            raise ConfigurationError("grid is empty")
        grid = []
        for point in self.grid:
            if len(point) != 3:
                raise ConfigurationError(f"grid point {point!r} is not (ta, alpha, beta)")
            ta, alpha, beta = (float(x) for x in point)
            ModelParams(alpha=alpha, beta=beta, activity_period_days=ta, default_basic_value=self.basic_value)
            grid.append((ta, alpha, beta))
        self.grid = grid
        if self.sample_source not in ("simulated", "snapshot"):
            raise ConfigurationError(f"sample_source must be 'simulated' or 'snapshot', got {self.sample_source!r}")

    def rule_table(self) -> ReputationRuleTable:
        return ReputationRuleTable.from_file(self.rules) if self.rules else ReputationRuleTable.default()


def parse_config(text: str, base_dir=None) -> SweepConfig:
    """Read ``key = value`` lines; ``grid`` may repeat (``ta,alpha,beta`` or a preset name)."""
    base = Path(base_dir) if base_dir is not None else None
    values: dict = {}
    grid = []
    sampling = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (p.strip() for p in line.partition("="))
        if not sep:
            raise ConfigurationError(f"config line {lineno} is not key = value: {raw!r}")
        if key == "grid":
            if value in GRID_PRESETS:
                grid.extend(GRID_PRESETS[value])
            else:
                grid.append(tuple(float(x) for x in value.split(",")))
        elif key in ("buckets", "per_bucket", "on_deficient"):
            sampling[key] = value
        elif key in ("posts", "comments", "votes", "users", "rules", "sample_file", "out"):
            path = Path(value)
            if base is not None and not path.is_absolute():
                path = base / path
            values["outputs" if key == "out" else key] = str(path)
        elif key == "window":
            values["window"] = Window.parse(value)
        elif key in ("seed", "n_jobs"):
            values[key] = int(value)
        elif key == "basic_value":
            values[key] = float(value)
        elif key == "sample_source":
            values[key] = value
        else:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
    if grid:
        values["grid"] = grid
    if sampling:
        values["sample"] = SamplingSpec(
            bucket_count=int(sampling.get("buckets", 10)),
            per_bucket=int(sampling.get("per_bucket", 1500)),
            seed=values.get("seed", 0),
            on_deficient=sampling.get("on_deficient", "error"),
        )
    return SweepConfig(**values)


def load_config(path) -> SweepConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


@dataclass
class Dataset:
    events: EventLog
    posts: PostIndex
    votes: VoteTable
    snapshot: Optional[dict] = None
    counts: dict = field(default_factory=dict)

    @classmethod
    def from_csv(cls, posts, comments, votes, users=None, basic_value: float = 1.0) -> "Dataset":
        post_table: PostTable = load_table("post", posts)
        comment_table = load_table("comment", comments)
        vote_table = load_table("vote", votes)
        snapshot = load_table("user", users).as_dict() if users else None
        log = build_event_log(post_table, comment_table, basic_value)
        counts = {
            "posts": len(post_table), "comments": len(comment_table), "votes": len(vote_table),
            "events": len(log), "event_users": len(log.users), "events_dropped_invalid_user": log.dropped_invalid_user,
        }
        return cls(log, post_table.index(), vote_table, snapshot, counts)

    @classmethod
    def from_directory(cls, directory, basic_value: float = 1.0) -> "Dataset":
        d = Path(directory)
        users = d / CSV_FILES["user"]
        return cls.from_csv(d / CSV_FILES["post"], d / CSV_FILES["comment"], d / CSV_FILES["vote"],
                            users if users.exists() else None, basic_value)

    @classmethod
    def from_community(cls, community, basic_value: float = 1.0) -> "Dataset":
        log = build_event_log(community.post_table(), community.comment_table(), basic_value)
        votes = community.vote_table()
        counts = {"posts": len(community.posts), "comments": len(community.comment_ids), "votes": len(votes),
                  "events": len(log), "event_users": len(log.users), "events_dropped_invalid_user": 0}
        return cls(log, community.post_index(), votes, None, counts)

    def candidate_users(self) -> np.ndarray:
        return np.unique(np.concatenate([self.events.users, self.posts.author_ids[self.posts.author_ids > 0]]))

    def window(self) -> Window:
        stamps = [a for a in (self.events.timestamps, self.votes.timestamps) if len(a)]
        return Window.covering(np.concatenate(stamps))


@dataclass
class ExperimentResult:
    rows: list
    reports: list  # (daily report, historical report) per grid point
    users: np.ndarray
    window: Window
    so_matrix: SeriesMatrix
    vote_stats: VoteStats
    so_series_computations: int = 0
    audit: dict = field(default_factory=dict)


def _format(value) -> str:
    return repr(float(value))


def _grid_point(events: EventLog, users: np.ndarray, window: Window, reference: SeriesMatrix, point, basic_value: float):
    ta, alpha, beta = point
    est = DIBRMReputation(
        alpha=alpha, beta=beta, activity_period_days=ta, basic_value=basic_value,
        start=window.start, end=window.end, users=users,
    ).fit(events)
    daily = est.transform_series(events)
    echo = {"ta": ta, "alpha": alpha, "beta": beta}
    return compare_series(reference, daily, echo), compare_series(reference, daily.cumulative(), echo)


def select_users(config: SweepConfig, dataset: Dataset, so_final: dict) -> np.ndarray:
    if config.sample_file:
        return np.unique(np.array(read_sample(config.sample_file), dtype=np.int64))
    candidates = dataset.candidate_users()
    if config.sample is None:
        return candidates
    if config.sample_source == "snapshot":
        if dataset.snapshot is None:
            raise ConfigurationError("sample_source = snapshot needs a users file")
        source = {u: dataset.snapshot.get(u, 0) for u in candidates.tolist()}
    else:
        source = {u: so_final.get(u, 0) for u in candidates.tolist()}
    return np.array(stratified_sample(source, config.sample), dtype=np.int64)


def run_experiment(config: SweepConfig, dataset: Optional[Dataset] = None) -> ExperimentResult:
    """Score every grid point; writes ``results.csv`` (and friends) when ``config.outputs`` is set."""
    if dataset is None:
        if not (config.posts and config.comments and config.votes):
            raise ConfigurationError("run needs posts, comments and votes inputs")
        dataset = Dataset.from_csv(config.posts, config.comments, config.votes, config.users, config.basic_value)
    window = config.window or dataset.window()
    rules = config.rule_table()

    candidates = dataset.candidate_users()
    so = daily_so_series(dataset.votes, dataset.posts, rules, window, users=candidates)
    so_computations = 1
    users = select_users(config, dataset, so.final_totals)
    if len(users) == 0:
        raise ConfigurationError("no users to evaluate")
    reference = _reference_rows(so.matrix, users)

    args = [(dataset.events, users, window, reference, point, config.basic_value) for point in config.grid]
    if config.n_jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            reports = list(pool.map(_grid_point, *zip(*args)))
    else:
        reports = []
        for a in args:
            try:
                reports.append(_grid_point(*a))
            except Exception as exc:
                raise type(exc)(f"grid point ta={a[4][0]}, alpha={a[4][1]}, beta={a[4][2]}: {exc}") from exc

    rows = []
    for (ta, alpha, beta), (rep_d, rep_h) in zip(config.grid, reports):
        rows.append({
            "ta": ta, "alpha": alpha, "beta": beta,
            "mu_D": rep_d.mu, "sigma_D": rep_d.sigma, "mu_H": rep_h.mu, "sigma_H": rep_h.sigma,
        })
    audit = dict(dataset.counts)
    audit.update({
        "votes_applied": so.stats.applied, "votes_ignored": so.stats.ignored, "votes_unresolved": so.stats.unresolved,
        "candidate_users": len(candidates), "sampled_users": len(users), "days": window.days,
        "grid_points": len(config.grid), "so_series_computations": so_computations,
    })
    if dataset.snapshot is not None:
        for k, v in reputation_divergence(so.final_totals, dataset.snapshot).items():
            audit[f"snapshot_divergence_{k}"] = v
    for k, v in audit.items():
        logger.info("audit %s=%s", k, v)

    result = ExperimentResult(rows, reports, users, window, reference, so.stats, so_computations, audit)
    if config.outputs:
        write_results(result, config.outputs)
    return result


def _reference_rows(matrix: SeriesMatrix, users: np.ndarray) -> SeriesMatrix:
    values = np.zeros((len(users), matrix.n_days))
    for i, uid in enumerate(users.tolist()):
        if uid in matrix:
            values[i] = matrix.values[matrix.row(uid)]
    return SeriesMatrix(users, matrix.start_day, values)


def write_results(result: ExperimentResult, directory) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "results.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in result.rows:
            writer.writerow([_format(row[c]) for c in RESULT_COLUMNS])
    write_sample(result.users.tolist(), out / "sample.txt")
    with open(out / "audit.txt", "w", encoding="utf-8") as fh:
        fh.write(f"window={result.window}\n")
        for k, v in result.audit.items():
            fh.write(f"{k}={v}\n")
    return path


def emit_series(
    user_ids,
    params: ModelParams,
    window: Window,
    dataset: Dataset,
    out_dir,
    rules: Optional[ReputationRuleTable] = None,
) -> list[Path]:
    """One CSV per user with columns ``day,dibrm_value,historical_value,so_value``."""
    user_ids = [int(u) for u in user_ids]
    known = set(dataset.candidate_users().tolist())
    unknown = [u for u in user_ids if u not in known]
    if unknown:
        raise KeyError(f"unknown user ids: {unknown}")
    users = np.unique(np.array(user_ids, dtype=np.int64))
    est = DIBRMReputation(
        alpha=params.alpha, beta=params.beta, activity_period_days=params.activity_period_days,
        basic_value=params.default_basic_value, day_length_seconds=params.day_length_seconds,
        start=window.start, end=window.end, users=users,
    )
    daily = est.fit(dataset.events).transform_series(dataset.events)
    historical = daily.cumulative()
    so = daily_so_series(dataset.votes, dataset.posts, rules or ReputationRuleTable.default(), window, users=users).matrix
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dates = [d.isoformat() for d in window.dates()]
    paths = []
    for uid in users.tolist():
        path = out / f"series_user_{uid}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["day", "dibrm_value", "historical_value", "so_value"])
            d, h, s = (m.values[m.row(uid)].tolist() for m in (daily, historical, so))
            for j, day in enumerate(dates):
                writer.writerow([day, repr(d[j]), repr(h[j]), repr(s[j])])
        paths.append(path)
    return paths

