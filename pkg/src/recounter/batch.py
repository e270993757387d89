"""Lock-step execution of one machine over many streams at once.

Each stream owns one row of every state array; a step consumes one byte per
row.  The update rules are the same as :func:`recounter.machine.step`,
written as array operations so that exhaustive word enumeration (a million
words and more) runs in seconds.  Tests cross-check the two paths.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .machine import (
    COUNT_COUNTER,
    GAP_WINDOW_EXACT,
    GAP_WINDOW_PAPER,
    PLAIN_THRESHOLD,
    CounterMachine,
)

_MAX_REGISTER_BITS = 63


@dataclass
class BatchState:
    """Column-per-unit state arrays for ``rows`` parallel streams."""

    dfa: np.ndarray         # (rows,) int64
    armed: np.ndarray       # (rows, units) bool
    counters: np.ndarray    # (rows, units) int64
    marks: np.ndarray       # (rows, units) int64
    registers: np.ndarray   # (rows, units) uint64
    delays: np.ndarray      # (rows, units) uint64
    passed: np.ndarray      # (rows, units) bool
    latches: np.ndarray     # (rows, n_rules) bool
    latch_pos: np.ndarray   # (rows, n_rules) int64, -1 until latched
    position: int = 0

    @property
    def rows(self) -> int:
        return len(self.dfa)

    def repeat(self, times: int) -> BatchState:
        """Each row copied ``times`` times in place (trie expansion)."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = np.repeat(value, times, axis=0) if isinstance(value, np.ndarray) else value
        return BatchState(**out)

    def outputs(self) -> np.ndarray:
        """(rows, n_rules + 1) output bits, the last column being the disjunction."""
        return np.concatenate([self.latches, self.latches.any(axis=1, keepdims=True)], axis=1).astype(np.uint8)


def new_batch_state(machine: CounterMachine, rows: int) -> BatchState:
    for u in machine.units:
        width = max(u.presets[1] + 1, u.word_len)
        if width > _MAX_REGISTER_BITS:
            raise ValueError(f"window of {width} bits does not fit the batch registers")
    n_units = len(machine.units)
    shape = (rows, n_units)
    return BatchState(
        np.full(rows, machine.block1.start, dtype=np.int64),
        np.zeros(shape, dtype=bool),
        np.zeros(shape, dtype=np.int64),
        np.zeros(shape, dtype=np.int64),
        np.tile(np.array(machine._plan.initial_registers, dtype=np.uint64), (rows, 1)).reshape(shape),
        np.zeros(shape, dtype=np.uint64),
        np.zeros(shape, dtype=bool),
        np.zeros((rows, machine.n_rules), dtype=bool),
        np.full((rows, machine.n_rules), -1, dtype=np.int64),
    )


_ONE = np.uint64(1)


def _bit(values: np.ndarray, shift: int) -> np.ndarray:
    return ((values >> np.uint64(shift)) & _ONE).astype(bool)


def _counts(rp, state: BatchState, on: np.ndarray, live: np.ndarray) -> np.ndarray:
    rows = state.rows
    signal = on[:, rp.head_ch] if rp.head_ch >= 0 else np.ones(rows, dtype=bool)
    signal = signal & live
    for up in rp.counts:
        i = up.index
        in_class = on[:, up.aux_ch]
        if up.mode == COUNT_COUNTER:
            armed, c = state.armed[:, i], state.counters[:, i]
            keep = live & ~signal & armed & in_class & (c < up.p1)
            drop = live & ~signal & armed & ~keep
            c = np.where(keep, c + 1, c)
            c = np.where(signal, 0, c)
            armed = (armed | signal) & ~drop
            state.counters[:, i] = c
            state.armed[:, i] = armed
            ok = armed & (c >= up.p0)
        else:
            reg = state.registers[:, i]
            shifted = np.where(in_class, (reg << _ONE) & np.uint64(up.mask), np.uint64(0))
            shifted = shifted | signal.astype(np.uint64)
            reg = np.where(live, shifted, reg)
            state.registers[:, i] = reg
            ok = (reg >> np.uint64(up.p0)) != 0
        ok = ok & live
        if up.word_len:
            line = state.delays[:, i]
            delayed = _bit(line, up.word_len - 1)
            new_line = ((line << _ONE) | ok.astype(np.uint64)) & np.uint64(up.delay_mask)
            state.delays[:, i] = np.where(live, new_line, line)
            signal = delayed & on[:, up.word_ch] & live
        else:
            signal = ok
    return signal


def batch_step(machine: CounterMachine, state: BatchState, symbols: np.ndarray) -> None:
    """Advance every row by one byte, in place."""
    plan = machine._plan
    table = machine.block1.table
    outputs = machine.block1.outputs
    state.dfa = table[state.dfa, symbols].astype(np.int64)
    state.position += 1
    pos = state.position
    on = outputs[state.dfa]
    for rp in plan.rules:
        r = rp.rule_id
        live = ~state.latches[:, r]
        if not live.any():
            continue
        if rp.prefix_ch >= 0:
            prefix = on[:, rp.prefix_ch] & live
        else:
            prefix = _counts(rp, state, on, live)
        just_armed = np.zeros(state.rows, dtype=bool)
        first = rp.chain[0].index
        for up in rp.chain:
            i = up.index
            act = live & ~state.passed[:, i] & ~just_armed
            word_end = on[:, up.word_ch]
            armed = state.armed[:, i]
            if up.mode == PLAIN_THRESHOLD:
                a = act & armed
                c = state.counters[:, i]
                c = np.where(a & (c < up.p0), c + 1, c)
                fire = a & (c >= up.p0) & word_end
                state.counters[:, i] = c
                if i == first:
                    arm = act & ~armed & prefix
                    state.armed[:, i] = armed | arm
                    state.counters[:, i] = np.where(arm, 0, state.counters[:, i])
            elif up.mode == GAP_WINDOW_PAPER:
                a = act & armed
                c = state.counters[:, i] + 1
                mark = state.marks[:, i]
                mark = np.where(a & on[:, up.aux_ch] & (mark == 0), c, mark)
                expire = a & (c >= up.p2)
                keep = a & ~expire
                fire = (
                    keep & (c >= up.p0) & (c <= up.p1) & word_end
                    & ((mark == 0) | (mark > c - up.word_len))
                )
                counters = np.where(keep, c, state.counters[:, i])
                counters = np.where(expire, 0, counters)
                mark = np.where(expire, 0, mark)
                armed = (armed & ~expire)
                arm = act & ~armed & ~fire & prefix
                state.armed[:, i] = armed | arm
                state.counters[:, i] = np.where(arm, 0, counters)
                state.marks[:, i] = np.where(arm, 0, mark)
            elif up.mode == GAP_WINDOW_EXACT:
                reg = state.registers[:, i]
                forbidden = on[:, up.aux_ch]
                new_reg = np.where(forbidden, np.uint64(0), (reg << _ONE) & np.uint64(up.mask))
                new_reg = new_reg | (prefix & act).astype(np.uint64)
                ok = (new_reg >> np.uint64(up.p0 - up.word_len)) != 0
                line = state.delays[:, i]
                delayed = _bit(line, up.word_len - 1)
                new_line = ((line << _ONE) | ok.astype(np.uint64)) & np.uint64(up.delay_mask)
                state.registers[:, i] = np.where(act, new_reg, reg)
                state.delays[:, i] = np.where(act, new_line, line)
                state.armed[:, i] = np.where(act, (new_reg != 0) | (new_line != 0), armed)
                fire = act & delayed & word_end
            else:
                raise ValueError(f"unexpected chain unit mode {up.mode!r}")
            if fire.any():
                state.passed[:, i] |= fire
                state.armed[:, i] &= ~fire
                if up.last:
                    state.latches[:, r] |= fire
                    state.latch_pos[:, r] = np.where(fire, pos, state.latch_pos[:, r])
                else:
                    state.armed[:, i + 1] |= fire
                    state.counters[:, i + 1] = np.where(fire, 0, state.counters[:, i + 1])
                just_armed = fire
            else:
                just_armed = np.zeros(state.rows, dtype=bool)


def run_words(machine: CounterMachine, words: np.ndarray) -> BatchState:
    """Run every row of a (N, L) byte array to the end."""
    words = np.asarray(words, dtype=np.uint8)
    state = new_batch_state(machine, words.shape[0])
    for t in range(words.shape[1]):
        batch_step(machine, state, words[:, t])
    return state


def run_padded(machine: CounterMachine, words: list[bytes], pad: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Final output bits and first-latch offsets for words of mixed length.

    Words are padded to a common length; latches are monotone, so the bits
    of a word of length L are the latches set at positions <= L.
    """
    length = max((len(w) for w in words), default=0)
    grid = np.full((len(words), length), pad, dtype=np.uint8)
    lengths = np.zeros(len(words), dtype=np.int64)
    for i, w in enumerate(words):
        grid[i, : len(w)] = np.frombuffer(w, dtype=np.uint8)
        lengths[i] = len(w)
    state = run_words(machine, grid)
    latched = (state.latch_pos >= 0) & (state.latch_pos <= lengths[:, None])
    offsets = np.where(latched, state.latch_pos, -1)
    bits = np.concatenate([latched, latched.any(axis=1, keepdims=True)], axis=1).astype(np.uint8)
    return bits, offsets


def run_exhaustive(machine: CounterMachine, alphabet: bytes, max_len: int):
    """Yield (length, BatchState) for every word length 0..max_len.

    Row i of the state for length L is the i-th word of that length in
    length-lex order (the same order as ``oracle.word_layer``).  Each layer
    extends the previous one by one byte, so total work is the number of
    words rather than words times length.
    """
    symbols = np.frombuffer(bytes(alphabet), dtype=np.uint8)
    state = new_batch_state(machine, 1)
    yield 0, state
    for length in range(1, max_len + 1):
        state = state.repeat(len(symbols))
        batch_step(machine, state, np.tile(symbols, state.rows // len(symbols)))
        yield length, state
