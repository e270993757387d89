from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from recounter.pattern import (
    Class,
    Concat,
    Dot,
    Literal,
    PatternError,
    Repeat,
    RepeatRange,
    Star,
    Union,
    detect_blowup_signs,
    parse_pattern,
    unparse,
    walk,
)
from helpers import pattern_trees

DOT_STAR = Star(Dot())


def test_parse_chain_pattern():
    a, b, c, d = (Literal(x) for x in b"abcd")
    assert parse_pattern(b".*ab.*cd.*") == Concat((DOT_STAR, a, b, DOT_STAR, c, d, DOT_STAR))


def test_parse_negated_class_range():
    assert parse_pattern(b"[^x]{3,5}") == RepeatRange(Class(frozenset(b"x"), negated=True), 3, 5)


def test_bad_repeat_bounds_reports_offset():
    with pytest.raises(PatternError) as info:
        parse_pattern(b"a{5,3}")
    assert str(info.value) == "bad repeat bounds at offset 1"
    assert info.value.offset == 1


@pytest.mark.parametrize(
    "text, reason",
    [
        (b"(ab", "unbalanced parenthesis"),
        (b"ab)", "unbalanced parenthesis"),
        (b"[ab", "unterminated class"),
        (b"[]", "unterminated class"),
        (b"(a)\\1", "backreference"),
        (b"(?=a)b", "lookaround"),
        (b"a*?", "lazy quantifier"),
        (b"^ab", "anchor"),
        (b"[z-a]", "bad class range"),
    ],
)
def test_unsupported_or_malformed(text, reason):
    with pytest.raises(PatternError) as info:
        parse_pattern(text)
    assert reason in str(info.value)
    assert 0 <= info.value.offset <= len(text)


def test_negation_of_everything_is_empty():
    with pytest.raises(PatternError):
        parse_pattern(b"[^\\x00-\\xff]")


def test_classes_and_escapes():
    assert parse_pattern(b"[0-9]").bytes == frozenset(b"0123456789")
    assert parse_pattern(b"\\d") == parse_pattern(b"[0-9]")
    assert parse_pattern(b"\\x41") == Literal(0x41)
    assert parse_pattern(b"\\.") == Literal(ord("."))
    assert parse_pattern(b"a|b") == Union((Literal(97), Literal(98)))
    assert parse_pattern(b"(ab){2}") == Repeat(Concat((Literal(97), Literal(98))), 2)


def test_blowup_signs_none():
    assert detect_blowup_signs(parse_pattern(b"abc")) == []


def test_blowup_signs_dot_star_offsets():
    signs = detect_blowup_signs(parse_pattern(b".*ab.*cd.*"))
    assert [str(s) for s in signs] == ["DotStar@0", "DotStar@4", "DotStar@8"]


def test_blowup_signs_negated_class_repeat():
    assert [str(s) for s in detect_blowup_signs(parse_pattern(b"[^q]{7}x"))] == ["NegClassRepeat@0"]


def test_all_six_signs():
    text = b".*.+.{2}.{1,2}[^a]{3}[^a]{1,3}"
    kinds = [s.kind for s in detect_blowup_signs(parse_pattern(text))]
    assert kinds == ["DotStar", "DotPlus", "DotRepeat", "DotRepeatRange", "NegClassRepeat", "NegClassRepeatRange"]


def test_positive_class_repeat_is_not_a_sign():
    assert detect_blowup_signs(parse_pattern(b"[ab]{3}a*")) == []


@given(pattern_trees(b"ab\x00.("))
def test_unparse_round_trip(tree):
    assert parse_pattern(unparse(tree)) == tree


@given(st.binary(max_size=24))
def test_parser_is_total(data):
    try:
        tree = parse_pattern(data)
    except PatternError as exc:
        assert 0 <= exc.offset <= len(data)
    else:
        assert parse_pattern(unparse(tree)) == tree


@given(pattern_trees(b"abc"))
def test_tree_invariants(tree):
    for node in walk(tree):
        if isinstance(node, (Concat, Union)):
            assert len(node.children) >= 2
        if isinstance(node, RepeatRange):
            assert 0 <= node.k <= node.m
        if isinstance(node, Class):
            assert node.bytes


@given(st.binary(max_size=30))
def test_signs_have_spans_inside_text(data):
    try:
        tree = parse_pattern(data)
    except PatternError:
        return
    for sign in detect_blowup_signs(tree):
        assert 0 <= sign.span[0] < sign.span[1] <= len(data)


def test_multibyte_negation_rejected():
    with pytest.raises(PatternError, match="multi-byte"):
        parse_pattern(".*a¬(bc){1,2}c.*")
    # a lone sign not followed by a group is just its two literal bytes
    assert len(parse_pattern("a¬b").children) == 4
