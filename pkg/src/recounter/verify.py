"""Differential check: counter machine vs oracle vs classical pipeline.

All three are evaluated over every word up to a length on a small alphabet
and over random words.  Disagreements are counted per kind.  In paper gap
mode the machine may miss matches whose windows overlap; such misses are
counted as ``paper_divergences`` and do not fail the check, while any
machine acceptance the oracle rejects always does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .automata import DEFAULT_STATE_CAP, StateCapExceeded, minimize, subset_construct, thompson_nfa
from .batch import run_exhaustive, run_words
from .machine import GAP_WINDOW_PAPER, CounterMachine
from .oracle import batch_verdicts, word_count, word_layer
from .rules import Ruleset, recompose


@dataclass
class VerifyReport:
    words_checked: int = 0
    machine_vs_oracle: int = 0      # disagreements that fail the check
    offset_mismatches: int = 0      # first-latch offset differs from the earliest accepting prefix
    classical_vs_oracle: int = 0
    paper_divergences: int = 0      # paper-mode gap machine misses a match or latches late
    classical_skipped: list[int] = field(default_factory=list)
    examples: list[tuple[bytes, str]] = field(default_factory=list)

    @property
    def disagreements(self) -> int:
        return self.machine_vs_oracle + self.offset_mismatches + self.classical_vs_oracle

    @property
    def ok(self) -> bool:
        return self.disagreements == 0

    def lines(self) -> list[str]:
        out = [
            f"words checked: {self.words_checked}",
            f"machine vs oracle disagreements: {self.machine_vs_oracle}",
            f"first-latch offset mismatches: {self.offset_mismatches}",
            f"classical vs oracle disagreements: {self.classical_vs_oracle}",
            f"paper-mode gap divergences (sound, not failures): {self.paper_divergences}",
        ]
        if self.classical_skipped:
            out.append(f"classical pipeline skipped for rules {self.classical_skipped} (state cap)")
        for word, what in self.examples:
            out.append(f"  example {what}: {word!r}")
        return out


def _classical_dfas(ruleset: Ruleset, cap: int):
    dfas = []
    for rule in ruleset.rules:
        try:
            dfas.append(minimize(subset_construct(thompson_nfa(recompose(rule)), cap)))
        except StateCapExceeded:
            dfas.append(None)
    return dfas


class _Checker:
    def __init__(self, ruleset: Ruleset, machine: CounterMachine, cap: int, max_examples: int):
        self.ruleset = ruleset
        self.machine = machine
        self.report = VerifyReport()
        self.paper_rules = np.array(
            [any(u.mode == GAP_WINDOW_PAPER for u in machine.rule_units(r)) for r in range(ruleset.n)], dtype=bool
        )
        self.dfas = _classical_dfas(ruleset, cap)
        self.report.classical_skipped = [r for r, d in enumerate(self.dfas) if d is None]
        self.max_examples = max_examples

    def _example(self, words: np.ndarray, rows: np.ndarray, what: str) -> None:
        for i in rows[: max(0, self.max_examples - len(self.report.examples))]:
            self.report.examples.append((bytes(words[i]), what))

    def check(self, words: np.ndarray, latches: np.ndarray, latch_pos: np.ndarray) -> None:
        rep = self.report
        rep.words_checked += words.shape[0]
        expect, earliest = batch_verdicts(self.ruleset, words)
        over = latches & ~expect
        under = expect & ~latches
        allowed = under & self.paper_rules[None, :]
        failing = over | (under & ~allowed)
        bad_rows = np.flatnonzero(failing.any(axis=1))
        rep.machine_vs_oracle += len(bad_rows)
        self._example(words, bad_rows, "machine vs oracle")
        both = latches & expect
        late = both & (latch_pos > earliest) & self.paper_rules[None, :]
        offset_rows = np.flatnonzero((both & (latch_pos != earliest) & ~late).any(axis=1))
        rep.offset_mismatches += len(offset_rows)
        rep.paper_divergences += int((allowed | late).any(axis=1).sum())
        self._example(words, offset_rows, "first-latch offset")
        for r, dfa in enumerate(self.dfas):
            if dfa is None:
                continue
            q = np.full(words.shape[0], dfa.start, dtype=np.int64)
            for t in range(words.shape[1]):
                q = dfa.table[q, words[:, t]]
            rows = np.flatnonzero(dfa.accept[q] != expect[:, r])
            rep.classical_vs_oracle += len(rows)
            self._example(words, rows, f"classical vs oracle, rule {r}")


def differential_check(
    ruleset: Ruleset,
    machine: CounterMachine,
    alphabet: bytes = b"abcd",
    max_len: int = 10,
    n_random: int = 100_000,
    seed: int = 0,
    max_random_len: int = 64,
    state_cap: int = DEFAULT_STATE_CAP,
    max_examples: int = 5,
    word_budget: int = 5_000_000,
) -> VerifyReport:
    """Compare machine, oracle and classical DFA on enumerated and random words.

    Random words are drawn over ``alphabet`` with uniform length in
    ``0..max_random_len``.
    """
    alphabet = bytes(alphabet)
    if word_count(len(alphabet), max_len) > word_budget:
        raise ValueError(f"{word_count(len(alphabet), max_len)} words exceed the budget of {word_budget}")
    checker = _Checker(ruleset, machine, state_cap, max_examples)
    for length, state in run_exhaustive(machine, alphabet, max_len):
        checker.check(word_layer(alphabet, length), state.latches, state.latch_pos)
    if n_random:
        rng = np.random.default_rng(seed)
        symbols = np.frombuffer(alphabet, dtype=np.uint8)
        lengths = rng.integers(0, max_random_len + 1, size=n_random)
        for length in np.unique(lengths):
            count = int((lengths == length).sum())
            words = symbols[rng.integers(0, len(symbols), size=(count, int(length)))]
            state = run_words(machine, words)
            checker.check(words, state.latches, state.latch_pos)
    return checker.report
