from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recounter.automata import minimize, run_dfa, subset_construct, thompson_nfa
from recounter.oracle import (
    BudgetError,
    OracleVerdict,
    batch_verdicts,
    enumerate_words,
    oracle_match,
    oracle_match_gap,
    oracle_rule,
    word_count,
    word_layer,
)
from recounter.rules import make_ruleset, recompose
from helpers import random_chain_ruleset, random_gap_pattern


def rule(pattern):
    return make_ruleset([pattern]).rules[0]


def test_chain_examples():
    assert oracle_match(rule(".*ab.*cd.*"), b"abcd") == OracleVerdict(True, 4)
    assert oracle_match(rule(".*ab.*ba.*"), b"aba") == OracleVerdict(False, None)
    assert oracle_match(rule(".*ab.*cd.*ef.*"), b"abefcdef") == OracleVerdict(True, 8)


def test_gap_examples():
    gap = rule(".*ab[^z]{1,2}cd.*")
    assert oracle_match_gap(gap, b"abxcd").matched
    assert not oracle_match_gap(gap, b"abzcd").matched
    assert not oracle_match_gap(gap, b"abcd").matched


def test_wrong_oracle_for_shape():
    with pytest.raises(ValueError):
        oracle_match(rule(".*ab[^z]{1,2}cd.*"), b"abxcd")
    with pytest.raises(ValueError):
        oracle_match_gap(rule(".*ab.*cd.*"), b"abcd")


def test_enumeration_order():
    assert list(enumerate_words(b"ab", 2)) == [b"", b"a", b"b", b"aa", b"ab", b"ba", b"bb"]
    assert list(enumerate_words(b"a", 3)) == [b"", b"a", b"aa", b"aaa"]
    assert word_count(4, 10) == 1_398_101


def test_enumeration_budget():
    with pytest.raises(BudgetError):
        next(enumerate_words(b"abcd", 10, budget=1000))


def test_word_layer_matches_enumeration():
    words = [w for w in enumerate_words(b"abc", 4) if len(w) == 4]
    assert [bytes(row) for row in word_layer(b"abc", 4)] == words


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_prefix_methods_and_batch_agree(seed):
    rng = np.random.default_rng(seed)
    if seed % 2:
        ruleset = random_chain_ruleset(rng, n_max=2)
    else:
        ruleset = make_ruleset([random_gap_pattern(rng, b"abcd")])
    words = rng.choice(np.frombuffer(b"abcd", dtype=np.uint8), size=(30, 14))
    matched, earliest = batch_verdicts(ruleset, words)
    for i, row in enumerate(words):
        word = bytes(row)
        for r, rl in enumerate(ruleset.rules):
            by_dfa = oracle_rule(rl, word)
            assert oracle_rule(rl, word, "brute") == by_dfa
            assert matched[i, r] == by_dfa.matched
            assert earliest[i, r] == (by_dfa.earliest if by_dfa.matched else -1)
            assert by_dfa.earliest is None or by_dfa.earliest <= len(word)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_oracle_agrees_with_classical_pipeline(seed):
    rng = np.random.default_rng(seed)
    pattern = random_gap_pattern(rng) if seed % 3 == 0 else None
    ruleset = make_ruleset([pattern]) if pattern else random_chain_ruleset(rng, n_max=1)
    rl = ruleset.rules[0]
    dfa = minimize(subset_construct(thompson_nfa(recompose(rl))))
    for word in enumerate_words(b"abc", 7):
        assert run_dfa(dfa, word)[0] == oracle_rule(rl, word).matched, word
