"""Brute-force ground truth for the rule language.

Everything here is deliberately naive.  Membership of a prefix in ``.*R`` is
decided either by a dedicated single-rule DFA or by a recursive matcher over
the pattern tree, and the chain words are placed by exhaustive position
enumeration.  :func:`batch_verdicts` evaluates the same existential
definition over many equal-length words at once with array operations; it
is what makes exhaustive enumeration of a million words affordable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterator

import numpy as np

from .automata import Dfa, minimize, subset_construct, thompson_nfa
from .pattern import (
    Class,
    Concat,
    Dot,
    Empty,
    Literal,
    Node,
    Plus,
    Repeat,
    RepeatRange,
    Star,
    Union,
    concat,
)
from .rules import DecomposedRule, Ruleset

DEFAULT_WORD_BUDGET = 5_000_000


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class OracleVerdict:
    """Whether a rule matches, and the length of its shortest accepting prefix."""

    matched: bool
    earliest: int | None = None


# ---------------------------------------------------------------------------
# Recursive matcher
# ---------------------------------------------------------------------------

def _end_positions(node: Node, word: bytes, start: int, memo: dict) -> frozenset[int]:
    key = (id(node), start)
    hit = memo.get(key)
    if hit is not None:
        return hit
    n = len(word)
    if isinstance(node, Empty):
        out = frozenset((start,))
    elif isinstance(node, Literal):
        out = frozenset((start + 1,)) if start < n and word[start] == node.byte else frozenset()
    elif isinstance(node, Dot):
        out = frozenset((start + 1,)) if start < n else frozenset()
    elif isinstance(node, Class):
        out = frozenset((start + 1,)) if start < n and word[start] in node.bytes else frozenset()
    elif isinstance(node, Concat):
        current = frozenset((start,))
        for child in node.children:
            current = frozenset().union(*(_end_positions(child, word, s, memo) for s in current))
            if not current:
                break
        out = current
    elif isinstance(node, Union):
        out = frozenset().union(*(_end_positions(c, word, start, memo) for c in node.children))
    elif isinstance(node, (Star, Plus)):
        seen = set() if isinstance(node, Plus) else {start}
        frontier = [start]
        while frontier:
            nxt = []
            for s in frontier:
                for e in _end_positions(node.child, word, s, memo):
                    if e not in seen:
                        seen.add(e)
                        nxt.append(e)
            frontier = nxt
        out = frozenset(seen)
    elif isinstance(node, (Repeat, RepeatRange)):
        low = node.k
        high = node.k if isinstance(node, Repeat) else node.m
        current = frozenset((start,))
        collected = set(current) if low == 0 else set()
        for i in range(1, high + 1):
            current = frozenset().union(*(_end_positions(node.child, word, s, memo) for s in current))
            if i >= low:
                collected |= current
            if not current:
                break
        out = frozenset(collected)
    else:
        raise TypeError(f"not a pattern node: {node!r}")
    memo[key] = out
    return out


def regex_match(node: Node, word: bytes) -> bool:
    """Full-word membership by recursive descent over the pattern tree."""
    return len(word) in _end_positions(node, bytes(word), 0, {})


def prefix_positions_brute(prefix: Node, word: bytes) -> list[int]:
    """Every p such that ``word[:p]`` is in ``.*prefix``, by trying each start."""
    memo: dict = {}
    found: set[int] = set()
    for s in range(len(word) + 1):
        found |= _end_positions(prefix, bytes(word), s, memo)
    return sorted(found)


# ---------------------------------------------------------------------------
# Single-rule prefix DFA
# ---------------------------------------------------------------------------

@lru_cache(maxsize=256)
def prefix_dfa(prefix: Node) -> Dfa:
    """Minimal DFA of ``.*prefix``."""
    return minimize(subset_construct(thompson_nfa(concat([Star(Dot()), prefix]))))


def prefix_positions(prefix: Node, word: bytes) -> list[int]:
    dfa = prefix_dfa(prefix)
    q = dfa.start
    out = [0] if dfa.accept[q] else []
    for i, b in enumerate(word, start=1):
        q = int(dfa.table[q, b])
        if dfa.accept[q]:
            out.append(i)
    return out


# ---------------------------------------------------------------------------
# Scalar oracle
# ---------------------------------------------------------------------------

def _place_chain(word: bytes, words: tuple[bytes, ...], start: int) -> int | None:
    """Smallest end of a disjoint left-to-right placement of ``words`` after ``start``."""
    memo: dict[tuple[int, int], int | None] = {}

    def best(j: int, cur: int) -> int | None:
        if j == len(words):
            return cur
        key = (j, cur)
        if key in memo:
            return memo[key]
        w = words[j]
        result = None
        for q in range(cur, len(word) - len(w) + 1):
            if word[q: q + len(w)] == w:
                end = best(j + 1, q + len(w))
                if end is not None and (result is None or end < result):
                    result = end
        memo[key] = result
        return result

    return best(0, start)


def _positions(rule: DecomposedRule, word: bytes, method: str) -> list[int]:
    if method == "dfa":
        return prefix_positions(rule.prefix, word)
    if method == "brute":
        return prefix_positions_brute(rule.prefix, word)
    raise ValueError(f"unknown prefix method {method!r}")


def _verdict(ends: list[int]) -> OracleVerdict:
    return OracleVerdict(True, min(ends)) if ends else OracleVerdict(False, None)


def oracle_match(rule: DecomposedRule, word: bytes, method: str = "dfa") -> OracleVerdict:
    """Chain rule membership: ``word`` in ``.*R.*w1.*w2...wk.*``."""
    if rule.gap is not None:
        raise ValueError("gap rule: use oracle_match_gap")
    word = bytes(word)
    ends = []
    for p in _positions(rule, word, method):
        end = _place_chain(word, rule.chain, p)
        if end is not None:
            ends.append(end)
    return _verdict(ends)


def oracle_match_gap(rule: DecomposedRule, word: bytes, method: str = "dfa") -> OracleVerdict:
    """Gap rule membership: ``.*R[^c]{k,m}beta`` followed by any remaining chain."""
    if rule.gap is None:
        raise ValueError("not a gap rule")
    word = bytes(word)
    gap = rule.gap
    beta, rest = rule.chain[0], rule.chain[1:]
    ends = []
    for p in _positions(rule, word, method):
        for g in range(gap.k, gap.m + 1):
            s = p + g
            if s + len(beta) > len(word):
                break
            if any(b in gap.forbidden for b in word[p:s]):
                continue
            if word[s: s + len(beta)] != beta:
                continue
            end = _place_chain(word, rest, s + len(beta))
            if end is not None:
                ends.append(end)
    return _verdict(ends)


def oracle_rule(rule: DecomposedRule, word: bytes, method: str = "dfa") -> OracleVerdict:
    if rule.gap is not None:
        return oracle_match_gap(rule, word, method)
    return oracle_match(rule, word, method)


def oracle_ruleset(ruleset: Ruleset, word: bytes, method: str = "dfa") -> tuple[OracleVerdict, ...]:
    return tuple(oracle_rule(rule, word, method) for rule in ruleset.rules)


def oracle_vector(ruleset: Ruleset, word: bytes) -> tuple[int, ...]:
    """Expected final output bits: one per rule, then their disjunction."""
    bits = tuple(int(v.matched) for v in oracle_ruleset(ruleset, word))
    return bits + (int(any(bits)),)


# ---------------------------------------------------------------------------
# Word enumeration
# ---------------------------------------------------------------------------

def word_count(alphabet_size: int, max_len: int) -> int:
    return sum(alphabet_size ** i for i in range(max_len + 1))


def _alphabet_bytes(alphabet) -> bytes:
    if isinstance(alphabet, str):
        alphabet = alphabet.encode("latin-1")
    return bytes(alphabet)


def enumerate_words(alphabet, max_len: int, budget: int = DEFAULT_WORD_BUDGET) -> Iterator[bytes]:
    """All words of length 0..max_len in length-lex order."""
    symbols = _alphabet_bytes(alphabet)
    if not symbols:
        raise ValueError("alphabet must not be empty")
    total = word_count(len(symbols), max_len)
    if total > budget:
        raise BudgetError(f"{total} words exceed the budget of {budget}")
    for length in range(max_len + 1):
        for letters in product(symbols, repeat=length):
            yield bytes(letters)


def word_layer(alphabet, length: int) -> np.ndarray:
    """All words of one length as a (|A|^length, length) uint8 array, length-lex order."""
    symbols = np.frombuffer(_alphabet_bytes(alphabet), dtype=np.uint8)
    a = len(symbols)
    index = np.arange(a ** length, dtype=np.int64)
    powers = a ** np.arange(length - 1, -1, -1, dtype=np.int64)
    digits = (index[:, None] // powers[None, :]) % a
    return symbols[digits]


# ---------------------------------------------------------------------------
# Array oracle
# ---------------------------------------------------------------------------

def _prefix_mask(rule: DecomposedRule, words: np.ndarray) -> np.ndarray:
    """mask[i, p] is True iff words[i, :p] is in ``.*R``."""
    dfa = prefix_dfa(rule.prefix)
    n, length = words.shape
    mask = np.zeros((n, length + 1), dtype=bool)
    q = np.full(n, dfa.start, dtype=np.int64)
    mask[:, 0] = dfa.accept[dfa.start]
    for t in range(length):
        q = dfa.table[q, words[:, t]]
        mask[:, t + 1] = dfa.accept[q]
    return mask


def _occurrence_ends(words: np.ndarray, w: bytes) -> np.ndarray:
    """occ[i, t] is True iff ``w`` occupies words[i, t-|w|:t]."""
    n, length = words.shape
    occ = np.zeros((n, length + 1), dtype=bool)
    k = len(w)
    if k > length:
        return occ
    hit = np.ones((n, length - k + 1), dtype=bool)
    for j, b in enumerate(w):
        hit &= words[:, j: length - k + 1 + j] == b
    occ[:, k:] = hit
    return occ


def _after(reach: np.ndarray, occ: np.ndarray, k: int) -> np.ndarray:
    """Ends t of an occurrence starting at or after some reached position."""
    seen = np.logical_or.accumulate(reach, axis=1)
    out = np.zeros_like(occ)
    out[:, k:] = occ[:, k:] & seen[:, : reach.shape[1] - k]
    return out


def _gap_step(reach: np.ndarray, words: np.ndarray, rule: DecomposedRule) -> np.ndarray:
    gap = rule.gap
    beta = rule.chain[0]
    lb = len(beta)
    n, length = words.shape
    forbidden = np.isin(words, np.fromiter(gap.forbidden, dtype=np.uint8, count=len(gap.forbidden)))
    dirty = np.zeros((n, length + 1), dtype=np.int32)
    np.cumsum(forbidden, axis=1, out=dirty[:, 1:])
    occ = _occurrence_ends(words, beta)
    out = np.zeros_like(occ)
    for g in range(gap.k, gap.m + 1):
        # beta ends at t, starts at s = t - lb, gap begins at p = s - g
        first_t = lb + g
        if first_t > length:
            break
        t = np.arange(first_t, length + 1)
        s = t - lb
        p = s - g
        clean = dirty[:, s] == dirty[:, p]
        out[:, first_t:] |= occ[:, first_t:] & reach[:, p] & clean
    return out


def batch_verdicts(ruleset: Ruleset, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Oracle over a batch of equal-length words.

    Returns (matched (N, n) bool, earliest (N, n) int, -1 where unmatched).
    """
    words = np.asarray(words, dtype=np.uint8)
    if words.ndim != 2:
        raise ValueError("words must be a 2-D array")
    n_words, length = words.shape
    matched = np.zeros((n_words, ruleset.n), dtype=bool)
    earliest = np.full((n_words, ruleset.n), -1, dtype=np.int64)
    for r, rule in enumerate(ruleset.rules):
        reach = _prefix_mask(rule, words)
        chain = rule.chain
        if rule.gap is not None:
            reach = _gap_step(reach, words, rule)
            chain = chain[1:]
        for w in chain:
            reach = _after(reach, _occurrence_ends(words, w), len(w))
        hit = reach.any(axis=1)
        matched[:, r] = hit
        earliest[:, r] = np.where(hit, reach.argmax(axis=1), -1)
    return matched, earliest
