"""Shared generators for tests: random rulesets, pattern trees and DFAs."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from recounter.automata import Dfa
from recounter.pattern import (
    Class,
    Dot,
    Literal,
    Plus,
    Repeat,
    RepeatRange,
    Star,
    concat,
    expanded_size,
    union,
)
from recounter.rules import PLAIN, make_ruleset

LETTERS = b"abcd"


def _word(rng, alphabet: bytes, low: int, high: int) -> str:
    length = int(rng.integers(low, high + 1))
    return bytes(alphabet[int(i)] for i in rng.integers(0, len(alphabet), size=length)).decode("latin-1")


def random_prefix(rng, alphabet: bytes = LETTERS) -> str:
    """A blow-up-free prefix: word, class-then-word, or a union of words."""
    kind = int(rng.integers(0, 4))
    if kind == 0:
        return _word(rng, alphabet, 1, 3)
    if kind == 1:
        members = sorted(set(_word(rng, alphabet, 2, 3)))
        return "[" + "".join(members) + "]" + _word(rng, alphabet, 0, 2)
    if kind == 2:
        return "(" + _word(rng, alphabet, 1, 2) + "|" + _word(rng, alphabet, 1, 2) + ")" + _word(rng, alphabet, 0, 1)
    return _word(rng, alphabet, 1, 2) + "(" + _word(rng, alphabet, 1, 1) + "|" + _word(rng, alphabet, 1, 2) + ")"


def random_chain_patterns(rng, n_max: int = 4, chain_max: int = 3, alphabet: bytes = LETTERS) -> list[str]:
    n = int(rng.integers(1, n_max + 1))
    patterns = []
    for _ in range(n):
        chain = [_word(rng, alphabet, 1, 3) for _ in range(int(rng.integers(1, chain_max + 1)))]
        patterns.append(".*" + random_prefix(rng, alphabet) + ".*" + ".*".join(chain) + ".*")
    return patterns


def random_chain_ruleset(rng, n_max: int = 4, chain_max: int = 3, alphabet: bytes = LETTERS):
    return make_ruleset(random_chain_patterns(rng, n_max, chain_max, alphabet), PLAIN)


def random_gap_pattern(rng, alphabet: bytes = b"abc", bound: int = 3) -> str:
    k = int(rng.integers(0, bound + 1))
    m = int(rng.integers(k, bound + 1))
    forbidden = chr(alphabet[int(rng.integers(0, len(alphabet)))])
    quant = f"{{{k}}}" if k == m else f"{{{k},{m}}}"
    tail = ""
    if rng.random() < 0.3:
        tail = ".*" + _word(rng, alphabet, 1, 2)
    return ".*" + _word(rng, alphabet, 1, 2) + f"[^{forbidden}]" + quant + _word(rng, alphabet, 1, 2) + tail + ".*"


def random_dfa(rng, max_states: int = 12, symbols: bytes = b"abc") -> Dfa:
    """A random complete DFA; bytes outside ``symbols`` behave like the first symbol."""
    n = int(rng.integers(1, max_states + 1))
    table = np.empty((n, 256), dtype=np.int32)
    cols = rng.integers(0, n, size=(n, len(symbols)))
    table[:, :] = cols[:, :1]
    for j, s in enumerate(symbols):
        table[:, s] = cols[:, j]
    accept = rng.random(n) < 0.4
    return Dfa(table, int(rng.integers(0, n)), accept)


# -- hypothesis strategies ---------------------------------------------------

def _leaf(alphabet: bytes):
    return st.one_of(
        st.sampled_from(alphabet).map(Literal),
        st.just(Dot()),
        st.sets(st.sampled_from(alphabet), min_size=1, max_size=len(alphabet)).flatmap(
            lambda s: st.sampled_from(
                [Class(frozenset(s))] + ([Class(frozenset(s), negated=True)] if len(s) < 256 else [])
            )
        ),
    )


def _extend(children):
    small = st.integers(0, 3)
    return st.one_of(
        st.lists(children, min_size=2, max_size=3).map(concat),
        st.lists(children, min_size=2, max_size=3).map(union),
        children.map(Star),
        children.map(Plus),
        st.tuples(children, small).map(lambda t: Repeat(t[0], t[1])),
        st.tuples(children, small, small).map(lambda t: RepeatRange(t[0], min(t[1], t[2]), max(t[1], t[2]))),
    )


def pattern_trees(alphabet: bytes = b"ab", max_leaves: int = 6, max_size: int = 30):
    """Pattern trees over ``alphabet`` with expanded size at most ``max_size``."""
    return st.recursive(_leaf(alphabet), _extend, max_leaves=max_leaves).filter(
        lambda t: expanded_size(t) <= max_size
    )
