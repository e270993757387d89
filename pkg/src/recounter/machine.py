"""DFA-with-counters scanner.

A compiled :class:`CounterMachine` has three layers:

* block 1, an annotated DFA whose channels say "a prefix ``.*R`` ends here",
  "chain word j ends here", "a forbidden gap byte was read", ...;
* block 2, one counting unit per (rule, chain stage) that is armed when the
  previous stage completes and gates the next chain word on elapsed distance;
* block 3, one latch per rule plus the disjunction over all rules.

The machine is immutable.  All per-stream state lives in a :class:`ScanState`
whose size depends only on the machine, never on the stream length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .automata import (
    CHAIN_WORD_END,
    COUNT_CLASS,
    COUNT_PRE,
    COUNT_SUFFIX,
    DEFAULT_STATE_CAP,
    GAP_FORBIDDEN,
    PREFIX_END,
    AnnotatedDfa,
    Channel,
    build_block1,
)
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
    nullable,
)
from .rules import DOUBLE_COUNTING, Ruleset, counted_prefix

WINDOW_PAPER = "paper"
WINDOW_EXACT = "exact"
WINDOW_MODES = (WINDOW_PAPER, WINDOW_EXACT)

PLAIN_THRESHOLD = "plain_threshold"
GAP_WINDOW_PAPER = "gap_window_paper"
GAP_WINDOW_EXACT = "gap_window_exact"
COUNT_COUNTER = "count_counter"
COUNT_REGISTER = "count_register"
UNIT_MODES = (PLAIN_THRESHOLD, GAP_WINDOW_PAPER, GAP_WINDOW_EXACT, COUNT_COUNTER, COUNT_REGISTER)
CHAIN_MODES = (PLAIN_THRESHOLD, GAP_WINDOW_PAPER, GAP_WINDOW_EXACT)

STAGE_ADVANCE = "stage_advance"
RULE_MATCH = "rule_match"


@dataclass(frozen=True)
class CounterUnit:
    """One counting element.

    Chain units (stage = chain position): ``plain_threshold`` has presets
    ``(|word|, 0, 0)``; the gap modes have ``(k+|w|, m+|w|, m+|w|+1)``.
    Prefix count units (stage = index of the counted repeat) have presets
    ``(k, m, 0)`` and ``word_len`` = length of the literal that follows.
    """

    rule_id: int
    stage: int
    mode: str
    presets: tuple[int, int, int]
    word_len: int

    @property
    def threshold(self) -> int:
        return self.presets[0]

    @property
    def lower(self) -> int:
        return self.presets[0]

    @property
    def upper(self) -> int:
        return self.presets[1]

    @property
    def expiry(self) -> int:
        return self.presets[2]

    @property
    def largest_preset(self) -> int:
        return max(self.presets)

    @property
    def is_chain(self) -> bool:
        return self.mode in CHAIN_MODES

    @property
    def gap_bounds(self) -> tuple[int, int]:
        """(k, m) of a gap unit."""
        return self.lower - self.word_len, self.upper - self.word_len


@dataclass(frozen=True)
class OutputVector:
    """Block-3 outputs: one bit per rule, then their disjunction."""

    bits: tuple[int, ...]

    @classmethod
    def from_latches(cls, latches) -> OutputVector:
        bits = tuple(1 if x else 0 for x in latches)
        return cls(bits + (1 if any(bits) else 0,))

    def __getitem__(self, i: int) -> int:
        return self.bits[i]

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def any(self) -> bool:
        return bool(self.bits[-1])

    def __le__(self, other: OutputVector) -> bool:
        return all(a <= b for a, b in zip(self.bits, other.bits))


@dataclass(frozen=True)
class MatchEvent:
    rule_id: int
    stage: int
    byte_offset: int
    kind: str

    def as_record(self) -> dict:
        return {"rule": self.rule_id, "stage": self.stage, "offset": self.byte_offset, "kind": self.kind}


@dataclass
class ScanState:
    """Mutable per-stream state.  Lists are sized once from the machine."""

    dfa_state: int
    armed: list[bool]
    counters: list[int]
    marks: list[int]        # gap paper mode: counter value at first forbidden byte (0 = none)
    registers: list[int]    # shift registers (exact gap windows, counted repeats)
    delays: list[int]       # delay lines feeding the word that follows a window
    passed: list[bool]      # unit has fired
    latches: list[bool]
    position: int = 0
    busy: bool = False
    start: int = field(default=0, repr=False)
    idle_busy: bool = field(default=False, repr=False)
    initial_registers: tuple[int, ...] = field(default=(), repr=False)

    def snapshot(self) -> tuple:
        return (
            self.dfa_state, tuple(self.armed), tuple(self.counters), tuple(self.marks),
            tuple(self.registers), tuple(self.delays), tuple(self.passed), tuple(self.latches),
            self.position, self.busy,
        )


class ScanIOError(OSError):
    def __init__(self, offset: int, cause: BaseException):
        super().__init__(f"read failed after {offset} bytes: {cause}")
        self.offset = offset


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------

def last_bytes(node: Node) -> frozenset[int]:
    """Bytes that can end a non-empty word of the node's language."""
    if isinstance(node, Literal):
        return frozenset((node.byte,))
    if isinstance(node, (Dot, Class)):
        return frozenset(range(256)) if isinstance(node, Dot) else node.bytes
    if isinstance(node, Empty):
        return frozenset()
    if isinstance(node, Concat):
        out: frozenset[int] = frozenset()
        for child in reversed(node.children):
            out |= last_bytes(child)
            if not nullable(child):
                break
        return out
    if isinstance(node, Union):
        return frozenset().union(*(last_bytes(c) for c in node.children))
    if isinstance(node, (Star, Plus)):
        return last_bytes(node.child)
    if isinstance(node, Repeat):
        return last_bytes(node.child) if node.k else frozenset()
    if isinstance(node, RepeatRange):
        return last_bytes(node.child) if node.m else frozenset()
    raise TypeError(f"not a pattern node: {node!r}")


def _count_units(rule, counted) -> list[CounterUnit]:
    units = []
    previous_tail: frozenset[int] | None = last_bytes(counted.head) if counted.head is not None else None
    for j, stage in enumerate(counted.stages):
        # A single counter is exact when no new window can open inside a run
        # of counted bytes: the byte that opens a window must not be countable.
        single = previous_tail is not None and not (previous_tail & stage.members)
        mode = COUNT_COUNTER if single else COUNT_REGISTER
        units.append(CounterUnit(rule.rule_id, j, mode, (stage.k, stage.m, 0), len(stage.suffix)))
        previous_tail = frozenset(stage.suffix[-1:]) if stage.suffix else None
    return units


def _chain_units(rule, window_mode: str) -> list[CounterUnit]:
    units = []
    for j, word in enumerate(rule.chain):
        w = len(word)
        if j == 0 and rule.gap is not None:
            mode = GAP_WINDOW_PAPER if window_mode == WINDOW_PAPER else GAP_WINDOW_EXACT
            presets = (rule.gap.k + w, rule.gap.m + w, rule.gap.m_prime)
            units.append(CounterUnit(rule.rule_id, j, mode, presets, w))
        else:
            units.append(CounterUnit(rule.rule_id, j, PLAIN_THRESHOLD, (w, 0, 0), w))
    return units


@dataclass(frozen=True)
class _UnitPlan:
    index: int
    mode: str
    p0: int
    p1: int
    p2: int
    word_len: int
    word_ch: int          # chain units: word end; count units: suffix end (-1 if none)
    aux_ch: int           # gap: forbidden byte; count units: class membership
    mask: int             # register width mask
    delay_mask: int
    last: bool


@dataclass(frozen=True)
class _RulePlan:
    rule_id: int
    prefix_ch: int        # -1 when the prefix is produced by count units
    head_ch: int          # count chain opener, -1 = every position
    counts: tuple[_UnitPlan, ...]
    chain: tuple[_UnitPlan, ...]
    always_busy: bool


class _Plan:
    """Precomputed lookup structures for the scalar stepping loop."""

    def __init__(self, machine: CounterMachine):
        block1 = machine.block1
        self.rows = block1.table.tolist()
        on = [frozenset(np.flatnonzero(row).tolist()) for row in block1.outputs]
        self.on = on
        index = {ch: i for i, ch in enumerate(block1.channels)}

        def ch(rule: int, kind: str, stage: int = 0) -> int:
            return index.get(Channel(rule, kind, stage), -1)

        rules = []
        for r in range(machine.n_rules):
            counts, chain = [], []
            units = [(i, u) for i, u in enumerate(machine.units) if u.rule_id == r]
            count_units = [(i, u) for i, u in units if not u.is_chain]
            chain_units = [(i, u) for i, u in units if u.is_chain]
            for i, u in count_units:
                counts.append(_UnitPlan(
                    i, u.mode, *u.presets, u.word_len,
                    ch(r, COUNT_SUFFIX, u.stage), ch(r, COUNT_CLASS, u.stage),
                    (1 << (u.presets[1] + 1)) - 1, (1 << u.word_len) - 1, False,
                ))
            for pos, (i, u) in enumerate(chain_units):
                width = u.gap_bounds[1] + 1 if u.mode == GAP_WINDOW_EXACT else 0
                chain.append(_UnitPlan(
                    i, u.mode, *u.presets, u.word_len,
                    ch(r, CHAIN_WORD_END, u.stage), ch(r, GAP_FORBIDDEN),
                    (1 << width) - 1, (1 << u.word_len) - 1, pos == len(chain_units) - 1,
                ))
            head = ch(r, COUNT_PRE)
            rules.append(_RulePlan(
                r, ch(r, PREFIX_END), head, tuple(counts), tuple(chain),
                bool(counts) and head < 0,
            ))
        self.rules = tuple(rules)
        # a counted repeat at the very start of a prefix may open its window
        # before the first byte, so its register starts with bit 0 set
        initial = [0] * len(machine.units)
        for rp in rules:
            if rp.counts and rp.head_ch < 0 and rp.counts[0].mode == COUNT_REGISTER:
                initial[rp.counts[0].index] = 1
        self.initial_registers = tuple(initial)


@dataclass(frozen=True, eq=False)
class CounterMachine:
    block1: AnnotatedDfa
    units: tuple[CounterUnit, ...]
    n_rules: int
    window_mode: str = WINDOW_PAPER
    _plan: _Plan = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_plan", _Plan(self))

    @property
    def output_width(self) -> int:
        return self.n_rules + 1

    @property
    def chain_units(self) -> tuple[CounterUnit, ...]:
        return tuple(u for u in self.units if u.is_chain)

    @property
    def count_units(self) -> tuple[CounterUnit, ...]:
        return tuple(u for u in self.units if not u.is_chain)

    def rule_units(self, rule_id: int) -> tuple[CounterUnit, ...]:
        return tuple(u for u in self.units if u.rule_id == rule_id and u.is_chain)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, CounterMachine)
            and self.n_rules == other.n_rules
            and self.window_mode == other.window_mode
            and self.units == other.units
            and self.block1 == other.block1
        )

    __hash__ = None  # type: ignore[assignment]


def compile_machine(
    ruleset: Ruleset,
    window_mode: str = WINDOW_PAPER,
    state_cap: int = DEFAULT_STATE_CAP,
) -> CounterMachine:
    """Compile a ruleset into blocks 1-3."""
    if window_mode not in WINDOW_MODES:
        raise ValueError(f"unknown window mode {window_mode!r}")
    block1 = build_block1(ruleset, state_cap)
    units: list[CounterUnit] = []
    for rule in ruleset.rules:
        counted = counted_prefix(rule.prefix) if ruleset.mode == DOUBLE_COUNTING else None
        if counted is not None:
            units += _count_units(rule, counted)
        units += _chain_units(rule, window_mode)
    return CounterMachine(block1, tuple(units), ruleset.n, window_mode)


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

def new_scan_state(machine: CounterMachine) -> ScanState:
    u = len(machine.units)
    state = ScanState(
        machine.block1.start, [False] * u, [0] * u, [0] * u, [0] * u, [0] * u,
        [False] * u, [False] * machine.n_rules, start=machine.block1.start,
    )
    state.idle_busy = state.busy = any(rp.always_busy for rp in machine._plan.rules)
    state.initial_registers = machine._plan.initial_registers
    state.registers[:] = list(state.initial_registers)
    return state


def reset(state: ScanState) -> ScanState:
    """Restore the fresh-state condition in place and return the state."""
    u = len(state.armed)
    state.dfa_state = state.start
    state.armed[:] = [False] * u
    state.counters[:] = [0] * u
    state.marks[:] = [0] * u
    state.registers[:] = list(state.initial_registers) or [0] * u
    state.delays[:] = [0] * u
    state.passed[:] = [False] * u
    state.latches[:] = [False] * len(state.latches)
    state.position = 0
    state.busy = state.idle_busy
    return state


def _prefix_from_counts(rp: _RulePlan, state: ScanState, on: frozenset[int]) -> bool:
    signal = (rp.head_ch in on) if rp.head_ch >= 0 else True
    for up in rp.counts:
        i = up.index
        in_class = up.aux_ch in on
        if up.mode == COUNT_COUNTER:
            if signal:
                state.counters[i] = 0
                state.armed[i] = True
            elif state.armed[i]:
                if in_class and state.counters[i] < up.p1:
                    state.counters[i] += 1
                else:
                    state.armed[i] = False
            ok = state.armed[i] and state.counters[i] >= up.p0
        else:
            reg = ((state.registers[i] << 1) & up.mask) if in_class else 0
            if signal:
                reg |= 1
            state.registers[i] = reg
            ok = (reg >> up.p0) != 0
        if up.word_len:
            line = state.delays[i]
            delayed = (line >> (up.word_len - 1)) & 1
            state.delays[i] = ((line << 1) | ok) & up.delay_mask
            signal = bool(delayed) and up.word_ch in on
        else:
            signal = ok
    return signal


def _count_busy(rp: _RulePlan, state: ScanState) -> bool:
    for up in rp.counts:
        i = up.index
        if state.armed[i] or state.registers[i] or state.delays[i]:
            return True
    return rp.always_busy


def _update(plan: _Plan, state: ScanState, on: frozenset[int], events: list | None) -> bool:
    """Blocks 2 and 3 for one consumed byte.  Returns the new busy flag."""
    busy = False
    pos = state.position
    armed, counters, passed = state.armed, state.counters, state.passed
    for rp in plan.rules:
        r = rp.rule_id
        if state.latches[r]:
            continue
        if rp.prefix_ch >= 0:
            prefix = rp.prefix_ch in on
        else:
            prefix = _prefix_from_counts(rp, state, on)
            busy = busy or _count_busy(rp, state)
        skip_next = False
        for up in rp.chain:
            i = up.index
            if passed[i]:
                continue
            if skip_next:
                # armed this very step by the previous stage: counter stays 0
                skip_next = False
                busy = True
                continue
            fire = False
            if up.mode == PLAIN_THRESHOLD:
                if armed[i]:
                    c = counters[i]
                    if c < up.p0:
                        c += 1
                        counters[i] = c
                    if c >= up.p0 and up.word_ch in on:
                        fire = True
                    elif c < up.p0:
                        busy = True
                elif i == rp.chain[0].index and prefix:
                    armed[i] = True
                    counters[i] = 0
                    busy = True
            elif up.mode == GAP_WINDOW_PAPER:
                if armed[i]:
                    c = counters[i] + 1
                    if up.aux_ch in on and state.marks[i] == 0:
                        state.marks[i] = c
                    if c >= up.p2:
                        armed[i] = False
                        counters[i] = 0
                        state.marks[i] = 0
                    else:
                        counters[i] = c
                        mark = state.marks[i]
                        if (
                            up.p0 <= c <= up.p1
                            and up.word_ch in on
                            and (mark == 0 or mark > c - up.word_len)
                        ):
                            fire = True
                if not armed[i] and not fire and prefix:
                    armed[i] = True
                    counters[i] = 0
                    state.marks[i] = 0
                if armed[i]:
                    busy = True
            else:  # GAP_WINDOW_EXACT
                reg = state.registers[i]
                reg = ((reg << 1) & up.mask) if up.aux_ch not in on else 0
                if prefix:
                    reg |= 1
                state.registers[i] = reg
                ok = (reg >> (up.p0 - up.word_len)) != 0
                line = state.delays[i]
                delayed = (line >> (up.word_len - 1)) & 1
                line = ((line << 1) | ok) & up.delay_mask
                state.delays[i] = line
                armed[i] = bool(reg or line)
                if delayed and up.word_ch in on:
                    fire = True
                elif armed[i]:
                    busy = True
            if fire:
                passed[i] = True
                armed[i] = False
                if up.last:
                    state.latches[r] = True
                    if events is not None:
                        events.append(MatchEvent(r, i - rp.chain[0].index, pos, RULE_MATCH))
                else:
                    nxt = i + 1
                    armed[nxt] = True
                    counters[nxt] = 0
                    skip_next = True
                    if events is not None:
                        events.append(MatchEvent(r, i - rp.chain[0].index, pos, STAGE_ADVANCE))
    return busy


def step(machine: CounterMachine, state: ScanState, symbol: int, events: list | None = None) -> OutputVector:
    """Consume one byte and return the block-3 output vector."""
    plan = machine._plan
    q = plan.rows[state.dfa_state][symbol]
    state.dfa_state = q
    state.position += 1
    state.busy = _update(plan, state, plan.on[q], events)
    return OutputVector.from_latches(state.latches)


def output_vector(state: ScanState) -> OutputVector:
    return OutputVector.from_latches(state.latches)


def feed(machine: CounterMachine, state: ScanState, data: bytes, events: list | None = None) -> None:
    """Consume a chunk.  Bytes that leave every unit idle cost one lookup."""
    plan = machine._plan
    rows, on_sets = plan.rows, plan.on
    q = state.dfa_state
    pos = state.position
    busy = state.busy
    for b in data:
        q = rows[q][b]
        pos += 1
        on = on_sets[q]
        if on or busy:
            state.dfa_state = q
            state.position = pos
            busy = _update(plan, state, on, events)
    state.dfa_state = q
    state.position = pos
    state.busy = busy


def _chunks(stream, chunk_size: int) -> Iterable[bytes]:
    if isinstance(stream, (bytes, bytearray, memoryview)):
        yield bytes(stream)
        return
    read = getattr(stream, "read", None)
    if read is not None:
        while True:
            chunk = read(chunk_size)
            if not chunk:
                return
            yield chunk
        return
    yield from stream


def scan(
    machine: CounterMachine,
    stream,
    state: ScanState | None = None,
    chunk_size: int = 1 << 16,
) -> tuple[list[MatchEvent], OutputVector]:
    """Scan a byte source: bytes, a binary file object, or an iterable of chunks.

    Results do not depend on how the stream is chunked.
    """
    if state is None:
        state = new_scan_state(machine)
    events: list[MatchEvent] = []
    source = iter(_chunks(stream, chunk_size))
    while True:
        try:
            chunk = next(source)
        except StopIteration:
            break
        except OSError as exc:
            raise ScanIOError(state.position, exc) from exc
        feed(machine, state, chunk, events)
    return events, output_vector(state)
