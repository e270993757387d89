from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recounter.automata import distinguish, minimize, subset_construct, thompson_nfa
from recounter.pattern import detect_blowup_signs, parse_pattern, unparse
from recounter.rules import (
    DOUBLE_COUNTING,
    PLAIN,
    RulesetError,
    ShapeError,
    counted_prefix,
    decompose_rule,
    make_ruleset,
    parse_ruleset,
    recompose,
    ruleset_text,
)
from helpers import random_chain_patterns, random_gap_pattern


def _decompose(text, mode=PLAIN):
    return decompose_rule(parse_pattern(text), mode)


def _dfa(node):
    return minimize(subset_construct(thompson_nfa(node)))


def test_chain_split():
    rule = _decompose(b".*ab.*cd.*")
    assert unparse(rule.prefix) == b"ab"
    assert rule.gap is None
    assert rule.chain == (b"cd",)


def test_gap_split():
    rule = _decompose(b".*a(b|c)[^z]{2,4}de.*")
    assert unparse(rule.prefix) == b"a(b|c)"
    assert rule.gap.forbidden == frozenset(b"z")
    assert (rule.gap.k, rule.gap.m, rule.gap.m_prime) == (2, 4, 7)
    assert rule.chain == (b"de",)


def test_multi_word_chain():
    rule = _decompose(b".*ab.*cd.*ef.*")
    assert unparse(rule.prefix) == b"ab"
    assert rule.chain == (b"cd", b"ef")


def test_outer_dot_stars_are_optional():
    assert _decompose(b"ab.*cd") == _decompose(b".*ab.*cd.*")


def test_ruleset_sizes():
    rs = parse_ruleset(b".*ab.*cd.*\n.*ef.*gh.*")
    assert (rs.n, rs.m) == (2, 2)
    assert [r.rule_id for r in rs.rules] == [0, 1]


def test_comment_only_file_is_empty():
    with pytest.raises(RulesetError, match="empty ruleset"):
        parse_ruleset(b"# only comments")


def test_errors_name_their_line():
    with pytest.raises(RulesetError) as info:
        parse_ruleset(b".*ab.*cd.*\n.*a{2,1}.*b.*\n")
    assert [line for line, _ in info.value.errors] == [2]
    assert "line 2" in str(info.value)


def test_mode_directive():
    rs = parse_ruleset(b"# header\nmode=double_counting\n.*xa{2}b.*c.*\n")
    assert rs.mode == DOUBLE_COUNTING
    assert parse_ruleset(b"mode=double_counting\n.*ab.*c.*", mode=PLAIN).mode == PLAIN


@pytest.mark.parametrize(
    "text, fragment",
    [
        (b".*ab.*c[de].*", "chain word must be a literal word"),
        (b".*a.*b.*b.*.*", "empty chain word"),
        (b".*a.+b.*cd.*", "blow-up sign DotPlus"),
        (b".*a.{2}b.*cd.*", "blow-up sign DotRepeat"),
        (b".*ab.*", "no chain word"),
        (b".*a*.*b.*", "prefix matches the empty word"),
        (b".*ab[^z]{1,2}", "gap must be followed"),
    ],
)
def test_shape_errors(text, fragment):
    with pytest.raises(ShapeError) as info:
        _decompose(text)
    assert fragment in str(info.value)


def test_double_counting_admits_character_repeats():
    # plain mode expands a literal repeat; it is not a blow-up sign
    assert unparse(_decompose(b".*xa{2,3}b.*c.*").prefix) == b"xa{2,3}b"
    rule = _decompose(b".*xa{2,3}b.*c.*", DOUBLE_COUNTING)
    counted = counted_prefix(rule.prefix)
    assert unparse(counted.head) == b"x"
    assert [(s.members, s.k, s.m, s.suffix) for s in counted.stages] == [(frozenset(b"a"), 2, 3, b"b")]


def test_double_counting_counts_wildcard_repeats_only_at_top_level():
    with pytest.raises(ShapeError):
        _decompose(b".*x.{2}b.*c.*")
    assert counted_prefix(_decompose(b".*x.{2}b.*c.*", DOUBLE_COUNTING).prefix).stages[0].k == 2
    with pytest.raises(ShapeError, match="blow-up sign"):
        _decompose(b".*x(a.{2}|b)c.*d.*", DOUBLE_COUNTING)


def test_ruleset_text_round_trip():
    rs = parse_ruleset(b".*ab.*cd.*\n.*a[bc][^z]{1,2}d.*e.*\n")
    assert parse_ruleset(ruleset_text(rs)) == rs


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_recompose_preserves_language(seed):
    rng = np.random.default_rng(seed)
    text = random_chain_patterns(rng, n_max=1)[0] if rng.random() < 0.5 else random_gap_pattern(rng)
    original = parse_pattern(text)
    rule = decompose_rule(original)
    assert distinguish(_dfa(original), _dfa(recompose(rule))) is None
    assert detect_blowup_signs(rule.prefix) == []
    assert all(rule.chain)


@settings(max_examples=200)
@given(st.binary(max_size=16))
def test_decompose_never_crashes(data):
    try:
        tree = parse_pattern(data)
    except ValueError:
        return
    try:
        rule = decompose_rule(tree)
    except ShapeError:
        return
    assert detect_blowup_signs(rule.prefix) == []
    assert all(rule.chain)


def test_make_ruleset_matches_parse():
    assert make_ruleset([".*ab.*cd.*"]) == parse_ruleset(b".*ab.*cd.*")
