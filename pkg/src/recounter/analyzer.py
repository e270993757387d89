"""Storage accounting, the blow-up experiment and DOT export."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .automata import (
    CHAIN_WORD_END,
    COUNT_CLASS,
    COUNT_SUFFIX,
    DEFAULT_STATE_CAP,
    GAP_FORBIDDEN,
    PREFIX_END,
    Channel,
    AnnotatedDfa,
    Dfa,
    StateCapExceeded,
    describe_bytes,
    minimize,
    subset_construct,
    thompson_nfa,
)
from .machine import (
    COUNT_COUNTER,
    COUNT_REGISTER,
    GAP_WINDOW_EXACT,
    GAP_WINDOW_PAPER,
    PLAIN_THRESHOLD,
    CounterMachine,
    compile_machine,
)
from .pattern import unparse, literal_word
from .rules import Ruleset, make_ruleset, union_pattern


def bits_for(value: int) -> int:
    """Width of an unsigned counter holding 0..value."""
    return max(0, math.ceil(math.log2(value + 1)))


# ---------------------------------------------------------------------------
# Size report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SizeReport:
    block1_states: int
    n_channels: int
    transition_bits: int
    output_bits: int
    counter_bits: int
    mark_bits: int
    register_bits: int
    triggers: int
    gates: int
    n_rules: int

    @property
    def block1_bits(self) -> int:
        return self.transition_bits + self.output_bits

    @property
    def elements(self) -> int:
        """Counter bits plus triggers plus gates: the block 2 and 3 hardware."""
        return self.counter_bits + self.mark_bits + self.register_bits + self.triggers + self.gates

    def as_dict(self) -> dict:
        out = {name: getattr(self, name) for name in self.__dataclass_fields__}
        out["block1_bits"] = self.block1_bits
        out["elements"] = self.elements
        return out

    def summary(self) -> str:
        return (
            f"block1: {self.block1_states} states, {self.n_channels} channels, "
            f"{self.block1_bits} bits ({self.transition_bits} transition + {self.output_bits} output); "
            f"counters: {self.counter_bits} bits; marks: {self.mark_bits} bits; "
            f"registers: {self.register_bits} bits; triggers: {self.triggers}; gates: {self.gates}"
        )


def size_report(machine: CounterMachine) -> SizeReport:
    """Storage of a compiled machine, recomputed from the machine alone.

    Transition bits are ``|Q| * 256 * ceil(log2 |Q|)`` (at least one bit per
    cell), output bits ``|Q| * channels``.  Each counter takes
    ``ceil(log2(largest preset + 1))`` bits.  Shift registers and delay
    lines are reported apart from counters, as are gap marks.
    """
    q = machine.block1.n_states
    channels = machine.block1.n_channels
    cell = max(1, math.ceil(math.log2(q))) if q > 1 else 1
    counter_bits = mark_bits = register_bits = 0
    triggers = 0
    for u in machine.units:
        if u.mode in (PLAIN_THRESHOLD, GAP_WINDOW_PAPER, COUNT_COUNTER):
            counter_bits += bits_for(u.largest_preset)
        if u.mode == GAP_WINDOW_PAPER:
            mark_bits += bits_for(u.expiry)
        if u.mode == GAP_WINDOW_EXACT:
            register_bits += u.gap_bounds[1] + 1 + u.word_len
        if u.mode == COUNT_REGISTER:
            register_bits += u.upper + 1 + u.word_len
        if u.mode == COUNT_COUNTER:
            register_bits += u.word_len
        # armed and passed flags
        triggers += 2 if u.is_chain else 1
    triggers += machine.n_rules  # latches
    return SizeReport(
        block1_states=q,
        n_channels=channels,
        transition_bits=q * 256 * cell,
        output_bits=q * channels,
        counter_bits=counter_bits,
        mark_bits=mark_bits,
        register_bits=register_bits,
        triggers=triggers,
        gates=machine.n_rules + 1,
        n_rules=machine.n_rules,
    )


# ---------------------------------------------------------------------------
# Rule families
# ---------------------------------------------------------------------------

_LETTERS = bytes(range(ord("a"), ord("z") + 1)) + bytes(range(ord("A"), ord("Z") + 1)) + bytes(
    range(ord("0"), ord("9") + 1)
) + bytes(range(0xC0, 0x100))


def pair_family(n: int, m: int = 2) -> Ruleset:
    """``n`` rules ``.*alpha_i.*beta_i.*`` over 2n words of length m with disjoint letters.

    n=2, m=2 gives ``.*ab.*cd.*`` and ``.*ef.*gh.*``.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if 2 * n * m > len(_LETTERS):
        raise ValueError("family too large for the letter pool")
    patterns = []
    for i in range(n):
        base = 2 * i * m
        alpha = _LETTERS[base: base + m]
        beta = _LETTERS[base + m: base + 2 * m]
        patterns.append(b".*" + unparse(literal_word(alpha)) + b".*" + unparse(literal_word(beta)) + b".*")
    return make_ruleset(patterns)


def classical_states(ruleset: Ruleset, state_cap: int = DEFAULT_STATE_CAP) -> int | None:
    """Minimal DFA size of the whole ruleset as one pattern, None past the cap."""
    try:
        dfa = subset_construct(thompson_nfa(union_pattern(ruleset)), state_cap)
    except StateCapExceeded:
        return None
    return minimize(dfa).n_states


# ---------------------------------------------------------------------------
# Blow-up curve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurveRow:
    n: int
    classical_states: int | None  # None: state cap exceeded
    block1_states: int
    counter_bits: int


@dataclass(frozen=True)
class BlowupCurve:
    rows: tuple[CurveRow, ...]

    def __post_init__(self) -> None:
        ns = [r.n for r in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("curve rows must have strictly increasing n")

    def to_csv(self) -> str:
        lines = ["n,classical_states,block1_states,counter_bits"]
        for r in self.rows:
            classical = "cap_exceeded" if r.classical_states is None else str(r.classical_states)
            lines.append(f"{r.n},{classical},{r.block1_states},{r.counter_bits}")
        return "\n".join(lines) + "\n"

    def classical_ratios(self) -> list[float | None]:
        out = []
        for a, b in zip(self.rows, self.rows[1:]):
            if a.classical_states is None or b.classical_states is None:
                out.append(None)
            else:
                out.append(b.classical_states / a.classical_states)
        return out

    def block1_increments(self) -> list[int]:
        return [b.block1_states - a.block1_states for a, b in zip(self.rows, self.rows[1:])]


def blowup_curve(
    family: Callable[[int], Ruleset],
    n_range: Iterable[int],
    state_cap: int = DEFAULT_STATE_CAP,
) -> BlowupCurve:
    rows = []
    for n in n_range:
        ruleset = family(n)
        machine = compile_machine(ruleset, state_cap=state_cap)
        report = size_report(machine)
        rows.append(CurveRow(n, classical_states(ruleset, state_cap), report.block1_states, report.counter_bits))
    return BlowupCurve(tuple(rows))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def fit_bound(xs, ys) -> float:
    """Smallest C with y <= C * x for every sample."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    return float(np.max(ys / xs))


def fit_least_squares(xs, ys) -> float:
    """Least-squares slope through the origin."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    return float(xs @ ys / (xs @ xs))


def loglog_slope(xs, ys) -> float:
    """Exponent b of the best fit y ~ a * x**b."""
    slope, _ = np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------

def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _edges(table: np.ndarray, prefix: str) -> list[str]:
    lines = []
    for q in range(table.shape[0]):
        row = table[q]
        targets = np.unique(row)
        for t in targets:
            members = np.flatnonzero(row == t).tolist()
            lines.append(f"  {prefix}{q} -> {prefix}{int(t)} [label={_quote(describe_bytes(members))}];")
    return lines


def _channel_name(ch) -> str:
    return f"r{ch.rule_id}:{ch.kind}:{ch.stage}"


def _dfa_lines(dfa: Dfa | AnnotatedDfa, prefix: str) -> list[str]:
    lines = [f"  {prefix}start [shape=point];", f"  {prefix}start -> {prefix}{dfa.start};"]
    if isinstance(dfa, AnnotatedDfa):
        for q in range(dfa.n_states):
            fired = [_channel_name(dfa.channels[c]) for c in np.flatnonzero(dfa.outputs[q])]
            label = "\n".join([f"q{q}"] + fired)
            shape = "box" if fired else "circle"
            lines.append(f"  {prefix}{q} [label={_quote(label)}, shape={shape}];")
    else:
        for q in range(dfa.n_states):
            shape = "doublecircle" if dfa.accept[q] else "circle"
            lines.append(f"  {prefix}{q} [label={_quote(f'q{q}')}, shape={shape}];")
    return lines + _edges(dfa.table, prefix)


def _unit_label(index: int, unit) -> str:
    if unit.mode == PLAIN_THRESHOLD:
        return f"c{index}: \u2265{unit.threshold}"
    if unit.mode in (GAP_WINDOW_PAPER, GAP_WINDOW_EXACT):
        kind = "paper" if unit.mode == GAP_WINDOW_PAPER else "exact"
        return f"c{index}: [{unit.lower},{unit.upper}] expiry {unit.expiry} ({kind})"
    return f"c{index}: {{{unit.lower},{unit.upper}}} then {unit.word_len} ({unit.mode})"


def export_dot(automaton: Dfa | AnnotatedDfa | CounterMachine) -> str:
    """Graphviz text.  Output is deterministic for a given automaton."""
    lines = ["digraph automaton {", "  rankdir=LR;"]
    if not isinstance(automaton, CounterMachine):
        lines += _dfa_lines(automaton, "q")
        lines.append("}")
        return "\n".join(lines) + "\n"

    machine = automaton
    block1 = machine.block1
    lines.append("  subgraph cluster_block1 {")
    lines.append('    label="block 1";')
    lines += ["  " + line for line in _dfa_lines(block1, "q")]
    lines.append("  }")
    for c, ch in enumerate(block1.channels):
        lines.append(f"  ch{c} [label={_quote(_channel_name(ch))}, shape=cds];")
        for q in np.flatnonzero(block1.outputs[:, c]):
            lines.append(f"  q{int(q)} -> ch{c} [style=dotted, arrowhead=none];")
    index = {ch: c for c, ch in enumerate(block1.channels)}
    for u_index, unit in enumerate(machine.units):
        node = f"c{u_index}"
        lines.append(f"  {node} [label={_quote(_unit_label(u_index, unit))}, shape=box3d];")
        for c, ch in enumerate(block1.channels):
            if ch.rule_id == unit.rule_id and ch.stage == unit.stage and (
                (unit.is_chain and ch.kind == CHAIN_WORD_END)
                or (not unit.is_chain and ch.kind in (COUNT_CLASS, COUNT_SUFFIX))
            ):
                lines.append(f"  ch{c} -> {node};")
        if unit.is_chain and unit.stage == 0:
            for kind in (PREFIX_END, GAP_FORBIDDEN):
                c = index.get(Channel(unit.rule_id, kind, 0))
                if c is not None:
                    lines.append(f"  ch{c} -> {node};")
    for r in range(machine.n_rules):
        lines.append(f"  latch{r} [label={_quote(f'latch {r}')}, shape=invhouse];")
        chain = [i for i, u in enumerate(machine.units) if u.rule_id == r and u.is_chain]
        for a, b in zip(chain, chain[1:]):
            lines.append(f"  c{a} -> c{b} [label=fire];")
        if chain:
            lines.append(f"  c{chain[-1]} -> latch{r} [label=fire];")
        counts = [i for i, u in enumerate(machine.units) if u.rule_id == r and not u.is_chain]
        for a, b in zip(counts, counts[1:]):
            lines.append(f"  c{a} -> c{b};")
        if counts and chain:
            lines.append(f"  c{counts[-1]} -> c{chain[0]} [label=prefix];")
        lines.append(f"  latch{r} -> any;")
    lines.append('  any [label="OR", shape=invtriangle];')
    lines.append("}")
    return "\n".join(lines) + "\n"
