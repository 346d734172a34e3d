import datetime as dt
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dibrm.exceptions import ConfigurationError, CorruptLogError
from dibrm.so_sim import (
    IGNORE, PostIndex, PostRecord, PostType, ReputationRuleTable, VoteEvent, VoteStats,
    VoteTable, apply_vote, daily_so_series,
)
from dibrm.timeutil import Window, date_to_seconds

DAY = 86400
W = Window("2011-03-01", "2011-03-07")
T0 = date_to_seconds(dt.date(2011, 3, 1))

POSTS = {
    1: PostRecord(1, 10, PostType.QUESTION, None, T0 - DAY),
    2: PostRecord(2, 20, PostType.ANSWER, 1, T0 - DAY),
}


def vote(vid, post, vtype, t):
    return VoteEvent(vid, post, vtype, t)


def test_default_upvote_on_answer():
    totals = apply_vote({}, vote(1, 2, 2, T0), POSTS, ReputationRuleTable.default())
    assert totals == {20: 10}


def test_default_upvote_on_question():
    totals = apply_vote({}, vote(1, 1, 2, T0), POSTS, ReputationRuleTable.default())
    assert totals == {10: 5}


def test_default_accept():
    totals = apply_vote({}, vote(1, 2, 1, T0), POSTS, ReputationRuleTable.default())
    assert totals == {20: 15}


def test_missing_post_skipped():
    stats = VoteStats()
    totals = apply_vote({}, vote(1, 99, 2, T0), POSTS, ReputationRuleTable.default(), stats)
    assert totals == {}
    assert stats.unresolved == 1


def test_downvote_on_answer():
    rules = ReputationRuleTable.default()
    rules.floor = None
    assert apply_vote({}, vote(1, 2, 3, T0), POSTS, rules) == {20: -2}


def test_floor_holds_after_first_credit():
    totals = apply_vote({}, vote(1, 2, 3, T0), POSTS, ReputationRuleTable.default())
    assert totals == {20: 1}


def test_ignored_vote_types():
    stats = VoteStats()
    rules = ReputationRuleTable.default()
    for vt in (0, 4, 5, 6, 7, 8, 9):
        assert rules.delta(vt, PostType.ANSWER) is IGNORE
        apply_vote({}, vote(1, 2, vt, T0), POSTS, rules, stats)
    assert stats.ignored == 7 and stats.applied == 0


def test_unknown_vote_type_is_config_error():
    rules = ReputationRuleTable.parse("2.answer = 10\n")
    with pytest.raises(ConfigurationError):
        apply_vote({}, vote(1, 2, 3, T0), POSTS, rules)
    with pytest.raises(ConfigurationError):
        daily_so_series([vote(1, 2, 3, T0)], POSTS, rules, W)


def test_vote_type_range():
    with pytest.raises(ValueError):
        VoteEvent(1, 1, 10, T0)


def test_rule_file_round_trip(tmp_path):
    path = tmp_path / "rules.txt"
    text = "# custom\n2.answer = 7\n2.question = 3\n3 = ignore\nfloor = off\ndaily_cap = 200\n"
    path.write_text(text)
    rules = ReputationRuleTable.from_file(path)
    assert rules.deltas == {(2, PostType.ANSWER): 7, (2, PostType.QUESTION): 3}
    assert rules.ignored == frozenset({3})
    assert rules.floor is None and rules.daily_cap == 200
    assert ReputationRuleTable.parse(rules.to_text()) == rules


@pytest.mark.parametrize("line", ["2 = 10", "2.answer = ignore", "12.answer = 1", "2.wiki = 3", "nonsense"])
def test_rule_file_rejects(line):
    with pytest.raises(ConfigurationError):
        ReputationRuleTable.parse(line)


def test_rule_table_clash():
    with pytest.raises(ConfigurationError):
        ReputationRuleTable.parse("2.answer = 10\n2 = ignore\n")


def test_post_record_invariants():
    with pytest.raises(ValueError):
        PostRecord(1, 1, PostType.ANSWER, None)
    with pytest.raises(ValueError):
        PostRecord(1, 1, PostType.QUESTION, 5)


def test_post_index_lookup():
    index = PostIndex.from_records(POSTS.values())
    authors, types = index.lookup([2, 1, 3])
    assert authors.tolist() == [20, 10, -1]
    assert types.tolist()[:2] == [2, 1]
    assert index.get(3) is None
    assert PostIndex([], [], []).lookup([1])[0].tolist() == [-1]


# daily series -------------------------------------------------------------


def test_no_votes_all_zero():
    res = daily_so_series([], POSTS, None, W, users=[10, 20])
    assert res.matrix.values.shape == (2, 7)
    assert np.all(res.matrix.values == 0)


def test_step_function():
    rules = ReputationRuleTable.default()
    res = daily_so_series([vote(1, 2, 2, T0 + 3 * DAY + 50)], POSTS, rules, W)
    assert res.matrix.users.tolist() == [20]
    assert res.matrix.values[0].tolist() == [0, 0, 0, 10, 10, 10, 10]


def test_same_day_additivity():
    votes = [vote(1, 2, 3, T0 + 10), vote(2, 2, 2, T0 + 20)]
    res = daily_so_series(votes, POSTS, None, W)
    assert res.matrix.values[0, 0] == 8


def test_same_day_order_irrelevant_with_floor():
    a = daily_so_series([vote(1, 2, 3, T0 + 10), vote(2, 2, 2, T0 + 10)], POSTS, None, W)
    b = daily_so_series([vote(2, 2, 2, T0 + 10), vote(1, 2, 3, T0 + 10)], POSTS, None, W)
    assert np.array_equal(a.matrix.values, b.matrix.values)


def test_unsorted_votes():
    with pytest.raises(CorruptLogError):
        daily_so_series([vote(1, 2, 2, T0 + 10), vote(2, 2, 2, T0)], POSTS, None, W)


def test_votes_before_window_seed_totals_later_ignored():
    votes = [vote(1, 2, 2, T0 - 3 * DAY), vote(2, 2, 2, T0 + 30 * DAY)]
    res = daily_so_series(votes, POSTS, None, W)
    assert np.all(res.matrix.values[0] == 10)


def test_daily_cap():
    rules = ReputationRuleTable.default()
    rules.daily_cap = 25
    votes = [vote(k, 2, 2, T0 + k) for k in range(1, 5)]
    res = daily_so_series(votes, POSTS, rules, W)
    assert res.matrix.values[0, 0] == 25


def test_users_argument_controls_rows():
    res = daily_so_series([vote(1, 2, 2, T0)], POSTS, None, W, users=[5, 20])
    assert res.matrix.users.tolist() == [5, 20]
    assert res.matrix.values[0].sum() == 0


def random_world(seed, n_posts=30, n_votes=300, types=(1, 2, 3, 5)):
    rng = random.Random(seed)
    posts = []
    for pid in range(1, n_posts + 1):
        if pid == 1 or rng.random() < 0.4:
            posts.append(PostRecord(pid, rng.randint(1, 8), PostType.QUESTION, None, T0))
        else:
            posts.append(PostRecord(pid, rng.randint(1, 8), PostType.ANSWER, 1, T0))
    times = sorted(rng.randint(T0, T0 + 7 * DAY - 1) for _ in range(n_votes))
    votes = [VoteEvent(k, rng.randint(1, n_posts + 3), rng.choice(types), t) for k, t in enumerate(times, 1)]
    return posts, votes


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_conservation_without_floor(seed):
    posts, votes = random_world(seed)
    rules = ReputationRuleTable.default()
    rules.floor = None
    res = daily_so_series(votes, posts, rules, W)
    totals, stats = {}, VoteStats()
    index = PostIndex.from_records(posts)
    for v in votes:
        apply_vote(totals, v, index, rules, stats)
    assert res.stats == stats
    assert res.matrix.values[:, -1].sum() == stats.applied_delta_sum == sum(totals.values())
    assert stats.total == len(votes)
    assert {u: int(res.matrix.values[res.matrix.row(u), -1]) for u in totals} == totals


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_positive_rules_monotone(seed):
    posts, votes = random_world(seed, types=(1, 2))
    res = daily_so_series(votes, posts, None, W)
    assert np.all(np.diff(res.matrix.values, axis=1) >= 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_permuting_same_day_votes(seed):
    posts, votes = random_world(seed)
    by_day = {}
    for v in votes:
        by_day.setdefault((v.timestamp - T0) // DAY, []).append(v)
    rng = random.Random(seed)
    shuffled = []
    for day in sorted(by_day):
        group = by_day[day]
        rng.shuffle(group)
        # same-day votes re-stamped to one instant so the log stays sorted
        stamp = T0 + day * DAY
        shuffled += [VoteEvent(v.vote_id, v.post_id, v.vote_type, stamp) for v in group]
    base = daily_so_series([VoteEvent(v.vote_id, v.post_id, v.vote_type, T0 + ((v.timestamp - T0) // DAY) * DAY)
                            for v in votes], posts, None, W)
    assert np.array_equal(base.matrix.values, daily_so_series(shuffled, posts, None, W).matrix.values)


def test_vote_table_round_trip():
    votes = [vote(1, 2, 2, T0), vote(2, 1, 3, T0 + 5)]
    assert VoteTable.from_events(votes).events() == votes
