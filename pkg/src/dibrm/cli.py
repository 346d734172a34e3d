"""Command-line entry point: ``dibrm {ingest,sample,simulate-so,run,series,generate}``.

Exit status is 0 on a clean run, 2 when an ingest quality threshold or a
sampling constraint is breached and 1 on any other error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .exceptions import ConfigurationError, DIBRMError, IngestQualityError, SamplingError
from .experiment import Dataset, SweepConfig, emit_series, load_config, run_experiment
from .ingest import CSV_FILES, SamplingSpec, ingest_file, stratified_sample, write_sample
from .model import ModelParams
from .series import write_series_csv
from .so_sim import ReputationRuleTable, daily_so_series
from .synthetic import community_spec, generate
from .timeutil import Window

logger = logging.getLogger("dibrm")


def _rules(path):
    return ReputationRuleTable.from_file(path) if path else ReputationRuleTable.default()


def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for entity, src in (("post", args.posts), ("comment", args.comments), ("vote", args.votes), ("user", args.users)):
        if src is None:
            continue
        stats = ingest_file(entity, src, out / CSV_FILES[entity], args.max_skip_fraction)
        print(stats.summary())
    return 0


def _dataset(args) -> Dataset:
    if args.config:
        cfg = load_config(args.config)
        posts, comments, votes = args.posts or cfg.posts, args.comments or cfg.comments, args.votes or cfg.votes
    else:
        posts, comments, votes = args.posts, args.comments, args.votes
    if not (posts and comments and votes):
        raise ConfigurationError("need --posts, --comments and --votes (or a --config naming them)")
    return Dataset.from_csv(posts, comments, votes, getattr(args, "users", None))


def cmd_sample(args) -> int:
    data = _dataset(args)
    window = Window.parse(args.window) if args.window else data.window()
    so = daily_so_series(data.votes, data.posts, _rules(args.rules), window, users=data.candidate_users())
    if args.source == "snapshot":
        if data.snapshot is None:
            raise ConfigurationError("--source snapshot needs --users")
        values = {u: data.snapshot.get(u, 0) for u in data.candidate_users().tolist()}
    else:
        values = {u: so.final_totals.get(u, 0) for u in data.candidate_users().tolist()}
    spec = SamplingSpec(args.buckets, args.per_bucket, args.seed, args.on_deficient)
    ids = stratified_sample(values, spec)
    write_sample(ids, args.out)
    print(f"sampled {len(ids)} of {len(values)} users -> {args.out}")
    return 0


def cmd_simulate_so(args) -> int:
    data = _dataset(args)
    window = Window.parse(args.window) if args.window else data.window()
    result = daily_so_series(data.votes, data.posts, _rules(args.rules), window, users=data.candidate_users())
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    rows = write_series_csv(result.matrix, args.out)
    s = result.stats
    print(f"votes applied={s.applied} ignored={s.ignored} unresolved={s.unresolved}; wrote {rows} rows -> {args.out}")
    return 0


def _sweep_config(args) -> SweepConfig:
    cfg = load_config(args.config) if args.config else SweepConfig()
    for attr in ("posts", "comments", "votes", "rules"):
        if getattr(args, attr, None):
            setattr(cfg, attr, getattr(args, attr))
    if args.out:
        cfg.outputs = args.out
    if args.seed is not None:
        cfg.seed = args.seed
        if cfg.sample is not None:
            cfg.sample = SamplingSpec(cfg.sample.bucket_count, cfg.sample.per_bucket, args.seed, cfg.sample.on_deficient)
    return cfg


def cmd_run(args) -> int:
    cfg = _sweep_config(args)
    result = run_experiment(cfg)
    for row in result.rows:
        print("ta={ta:g} alpha={alpha:g} beta={beta:g} mu_D={mu_D:.4f} sigma_D={sigma_D:.4f} "
              "mu_H={mu_H:.4f} sigma_H={sigma_H:.4f}".format(**row))
    return 0


def cmd_series(args) -> int:
    cfg = _sweep_config(args)
    data = Dataset.from_csv(cfg.posts, cfg.comments, cfg.votes)
    window = cfg.window or data.window()
    params = ModelParams(alpha=args.alpha, beta=args.beta, activity_period_days=args.ta, default_basic_value=cfg.basic_value)
    paths = emit_series(args.user, params, window, data, cfg.outputs or ".", cfg.rule_table())
    for p in paths:
        print(p)
    return 0


def cmd_generate(args) -> int:
    spec = community_spec(args.n_users, args.days, args.seed, args.start, activity_period_days=args.ta)
    community = generate(spec)
    counts = community.write_xml(args.out) if args.xml else community.write_csv(args.out)
    print(", ".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dibrm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def inputs(p, config=True):
        p.add_argument("--posts")
        p.add_argument("--comments")
        p.add_argument("--votes")
        p.add_argument("--rules", help="rule table file (vote_type.post_type = delta)")
        if config:
            p.add_argument("--config")

    p = sub.add_parser("ingest", help="convert XML dumps to CSV")
    inputs(p, config=False)
    p.add_argument("--users")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--max-skip-fraction", type=float, default=0.01)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sample", help="draw a stratified user sample")
    inputs(p)
    p.add_argument("--users", help="users.csv, for --source snapshot")
    p.add_argument("--window")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--buckets", type=int, default=10)
    p.add_argument("--per-bucket", type=int, default=1500)
    p.add_argument("--on-deficient", choices=("error", "take_all"), default="error")
    p.add_argument("--source", choices=("simulated", "snapshot"), default="simulated")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate-so", help="daily vote-based reputation for every user")
    inputs(p)
    p.add_argument("--window")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate_so)

    p = sub.add_parser("run", help="run a parameter sweep")
    inputs(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("series", help="per-user daily series for plotting")
    inputs(p)
    p.add_argument("--user", type=int, action="append", required=True)
    p.add_argument("--ta", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.99)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("generate", help="write a synthetic community")
    p.add_argument("--n-users", type=int, default=500)
    p.add_argument("--days", type=int, default=365)
    p.add_argument("--start", default="2010-01-01")
    p.add_argument("--ta", type=float, default=2.0, help="activity period defining burst/sparse classes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--xml", action="store_true", help="write XML dumps instead of CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (IngestQualityError, SamplingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DIBRMError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
