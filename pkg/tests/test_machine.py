from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recounter.batch import run_padded, run_words
from recounter.machine import (
    COUNT_COUNTER,
    COUNT_REGISTER,
    GAP_WINDOW_EXACT,
    GAP_WINDOW_PAPER,
    PLAIN_THRESHOLD,
    RULE_MATCH,
    STAGE_ADVANCE,
    MatchEvent,
    ScanIOError,
    compile_machine,
    new_scan_state,
    reset,
    scan,
    step,
)
from recounter.oracle import oracle_ruleset, oracle_vector
from recounter.rules import DOUBLE_COUNTING, make_ruleset
from helpers import random_chain_ruleset, random_gap_pattern


def machine_for(*patterns, window="paper", mode="plain"):
    return compile_machine(make_ruleset(patterns, mode), window)


def final_bits(machine, word):
    return scan(machine, word)[1].bits


# -- compile --------------------------------------------------------------

def test_compile_single_chain():
    m = machine_for(".*ab.*cd.*")
    assert [(u.mode, u.threshold) for u in m.units] == [(PLAIN_THRESHOLD, 2)]
    assert m.output_width == 2


def test_compile_cascade():
    m = machine_for(".*ab.*cd.*ef.*")
    assert [(u.stage, u.threshold) for u in m.units] == [(0, 2), (1, 2)]


def test_compile_gap_presets():
    (unit,) = machine_for(".*ab[^z]{1,3}cd.*").units
    assert unit.mode == GAP_WINDOW_PAPER
    assert (unit.lower, unit.upper, unit.expiry) == (3, 5, 6)
    (exact,) = machine_for(".*ab[^z]{1,3}cd.*", window="exact").units
    assert exact.mode == GAP_WINDOW_EXACT and exact.presets == unit.presets


def test_compile_units_per_rule():
    m = machine_for(".*ab.*cd.*", ".*a.*b.*c.*d.*", ".*ab[^c]{2}d.*e.*")
    assert [len(m.rule_units(r)) for r in range(3)] == [1, 3, 2]


def test_compile_double_counting_units():
    m = machine_for(".*xa{2,3}b.*c.*", ".*a{2}b.*c.*", mode=DOUBLE_COUNTING)
    assert [(u.rule_id, u.mode, u.presets) for u in m.count_units] == [
        (0, COUNT_COUNTER, (2, 3, 0)),
        (1, COUNT_REGISTER, (2, 2, 0)),
    ]


def test_unknown_window_mode():
    with pytest.raises(ValueError):
        compile_machine(make_ruleset([".*a.*b.*"]), "fuzzy")


# -- fresh state and stepping --------------------------------------------------

def test_empty_stream_is_all_zero():
    m = machine_for(".*ab.*cd.*", ".*ef.*gh.*")
    events, out = scan(m, b"")
    assert events == [] and out.bits == (0, 0, 0)


def test_fresh_states_are_identical():
    m = machine_for(".*ab.*cd.*")
    a, b = new_scan_state(m), new_scan_state(m)
    assert a == b and a.position == 0 and a.dfa_state == m.block1.start


def test_abcd_latches_at_four():
    m = machine_for(".*ab.*cd.*")
    state = new_scan_state(m)
    outs = [step(m, state, b).bits for b in b"abcd"]
    assert outs == [(0, 0), (0, 0), (0, 0), (1, 1)]


def test_overlap_aba_rejected():
    m = machine_for(".*ab.*ba.*")
    state = new_scan_state(m)
    assert [step(m, state, b).bits for b in b"aba"] == [(0, 0)] * 3
    assert state.counters[0] == 1


def test_abba_accepted_at_four():
    m = machine_for(".*ab.*ba.*")
    state = new_scan_state(m)
    outs = [step(m, state, b).bits for b in b"abba"]
    assert outs[-1] == (1, 1) and outs[2] == (0, 0)


def test_scan_reports_earliest_offset():
    events, out = scan(machine_for(".*ab.*cd.*"), b"zzabzzcdzz")
    assert events == [MatchEvent(0, 0, 8, RULE_MATCH)]
    assert out.bits == (1, 1)


def test_scan_chunked():
    m = machine_for(".*ab.*cd.*")
    assert scan(m, [b"zzab", b"zzcdzz"]) == scan(m, b"zzabzzcdzz")
    assert scan(m, io.BytesIO(b"zzabzzcdzz"), chunk_size=3) == scan(m, b"zzabzzcdzz")


def test_stage_events():
    events, _ = scan(machine_for(".*ab.*cd.*ef.*"), b"abefcdef")
    assert events == [MatchEvent(0, 0, 6, STAGE_ADVANCE), MatchEvent(0, 1, 8, RULE_MATCH)]


def test_gap_examples():
    for window in ("paper", "exact"):
        m = machine_for(".*ab[^z]{1,2}cd.*", window=window)
        assert final_bits(m, b"abxcd") == (1, 1)
        assert final_bits(m, b"abzcd") == (0, 0)
        assert final_bits(m, b"abcd") == (0, 0)
        assert final_bits(m, b"abxxcd") == (1, 1)
        assert final_bits(m, b"abxxxcd") == (0, 0)


def test_paper_window_misses_overlapping_arm():
    # the second ab opens a window while the first is still counting
    word = b"abxxabxcd"
    paper = machine_for(".*ab[^z]{1,2}cd.*")
    exact = machine_for(".*ab[^z]{1,2}cd.*", window="exact")
    assert oracle_vector(make_ruleset([".*ab[^z]{1,2}cd.*"]), word) == (1, 1)
    assert final_bits(exact, word) == (1, 1)
    assert final_bits(paper, word) == (0, 0)


def test_forbidden_byte_inside_beta_is_allowed():
    m = machine_for(".*a[^b]{1}bc.*", window="paper")
    assert final_bits(m, b"axbc") == (1, 1)
    assert final_bits(m, b"abbc") == (0, 0)


def test_reset():
    m = machine_for(".*ab.*cd.*", ".*a{2}.*b.*")
    state = new_scan_state(m)
    scan(m, b"abxxcdaab", state)
    reset(state)
    assert state == new_scan_state(m)
    reset(state)
    assert state == new_scan_state(m)
    assert scan(m, b"abcd", state) == scan(m, b"abcd")


def test_reset_keeps_initial_registers():
    m = machine_for(".*a{2}b.*c.*", mode=DOUBLE_COUNTING)
    state = new_scan_state(m)
    scan(m, b"xxxx", state)
    reset(state)
    assert state == new_scan_state(m)
    assert scan(m, b"aabc", state)[1].bits == (1, 1)


def test_io_error_carries_offset():
    class Broken(io.RawIOBase):
        def __init__(self):
            self.calls = 0

        def read(self, n=-1):
            self.calls += 1
            if self.calls > 2:
                raise OSError("disk gone")
            return b"ab"

    with pytest.raises(ScanIOError) as info:
        scan(machine_for(".*ab.*cd.*"), Broken())
    assert info.value.offset == 4


def test_double_counting_examples():
    m = machine_for(".*xa{2,3}b.*c.*", mode=DOUBLE_COUNTING)
    assert final_bits(m, b"xaabc") == (1, 1)
    assert final_bits(m, b"xabc") == (0, 0)
    assert final_bits(m, b"xaaaabc") == (0, 0)
    m = machine_for(".*a{2}b.*c.*", mode=DOUBLE_COUNTING)
    assert final_bits(m, b"aaaabc") == (1, 1)
    assert final_bits(m, b"aabc") == (1, 1)


# -- properties ----------------------------------------------------------------

words_abcd = st.binary(max_size=40).map(lambda b: bytes(b"abcd"[x % 4] for x in b))


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1), st.lists(words_abcd, min_size=1, max_size=6))
def test_machine_matches_oracle(seed, words):
    ruleset = random_chain_ruleset(np.random.default_rng(seed))
    m = compile_machine(ruleset)
    for word in words:
        events, out = scan(m, word)
        verdicts = oracle_ruleset(ruleset, word)
        assert out.bits == tuple(int(v.matched) for v in verdicts) + (int(any(v.matched for v in verdicts)),)
        firsts = {e.rule_id: e.byte_offset for e in events if e.kind == RULE_MATCH}
        assert firsts == {r: v.earliest for r, v in enumerate(verdicts) if v.matched}


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), words_abcd)
def test_latches_never_drop_and_counters_saturate(seed, word):
    rng = np.random.default_rng(seed)
    patterns = [".*ab.*cd.*", random_gap_pattern(rng, b"abcd")]
    m = compile_machine(make_ruleset(patterns), "paper" if seed % 2 else "exact")
    state = new_scan_state(m)
    previous = (0,) * m.output_width
    sizes = tuple(len(x) for x in (state.armed, state.counters, state.registers, state.latches))
    for b in word:
        out = step(m, state, b).bits
        assert all(x <= y for x, y in zip(previous, out))
        assert out[-1] == int(any(out[:-1]))
        for u, c in zip(m.units, state.counters):
            assert c <= u.largest_preset
        previous = out
    assert sizes == tuple(len(x) for x in (state.armed, state.counters, state.registers, state.latches))


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1), words_abcd, st.lists(st.integers(0, 40), max_size=6))
def test_chunking_invariance(seed, word, cuts):
    rng = np.random.default_rng(seed)
    patterns = random_chain_ruleset(rng, n_max=2)
    m = compile_machine(patterns)
    cuts = sorted(set(c % (len(word) + 1) for c in cuts))
    pieces = [word[a:b] for a, b in zip([0] + cuts, cuts + [len(word)])]
    assert scan(m, pieces) == scan(m, word)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_batch_stepper_matches_scalar(seed):
    rng = np.random.default_rng(seed)
    kind = seed % 3
    if kind == 0:
        ruleset = random_chain_ruleset(rng)
    elif kind == 1:
        ruleset = make_ruleset([random_gap_pattern(rng, b"abc") for _ in range(2)])
    else:
        ruleset = make_ruleset([".*ca{1,2}b.*c.*", ".*[ab]{2,3}c{1}a.*b.*"], DOUBLE_COUNTING)
    for window in ("paper", "exact"):
        m = compile_machine(ruleset, window)
        words = [bytes(rng.choice(list(b"abcd"), size=int(rng.integers(0, 30))).tolist()) for _ in range(40)]
        bits, offsets = run_padded(m, words, pad=ord("z"))
        for i, word in enumerate(words):
            events, out = scan(m, word)
            assert tuple(bits[i]) == out.bits
            firsts = {e.rule_id: e.byte_offset for e in events if e.kind == RULE_MATCH}
            assert firsts == {r: int(o) for r, o in enumerate(offsets[i]) if o >= 0}


def test_batch_rows_are_independent():
    m = machine_for(".*ab.*cd.*")
    grid = np.frombuffer(b"abcdabdc", dtype=np.uint8).reshape(2, 4)
    state = run_words(m, grid)
    assert state.latches[:, 0].tolist() == [True, False]
    assert state.latch_pos[:, 0].tolist() == [4, -1]


def test_machine_is_not_mutated_by_scanning():
    m = machine_for(".*ab.*cd.*")
    before = (m.units, m.block1.table.copy(), m.block1.outputs.copy())
    scan(m, b"abcdabcd" * 10)
    assert m.units == before[0]
    assert np.array_equal(m.block1.table, before[1]) and np.array_equal(m.block1.outputs, before[2])
