"""Classical automata: Thompson NFA, subset construction, Moore minimization,
Aho-Corasick, and the annotated detector DFA ("block 1") of a ruleset.

Every DFA here is complete over the 256-byte alphabet and stored as a dense
``(n_states, 256)`` numpy table, so stepping is a single lookup.  Annotated
DFAs are Moore machines: each state carries a boolean output row with one
column per detector channel.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .pattern import (
    ALL_BYTES,
    ALPHABET_SIZE,
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
    byte_ranges,
)
from .rules import DOUBLE_COUNTING, Ruleset, counted_prefix

DEFAULT_STATE_CAP = 1_000_000

PREFIX_END = "prefix_end"
CHAIN_WORD_END = "chain_word_end"
GAP_FORBIDDEN = "gap_forbidden"
COUNT_PRE = "count_pre"
COUNT_CLASS = "count_class"
COUNT_SUFFIX = "count_suffix"
CHANNEL_KINDS = (PREFIX_END, CHAIN_WORD_END, GAP_FORBIDDEN, COUNT_PRE, COUNT_CLASS, COUNT_SUFFIX)


class StateCapExceeded(RuntimeError):
    """Determinization produced more states than allowed."""

    def __init__(self, cap: int):
        super().__init__(f"DFA construction exceeded the state cap of {cap}")
        self.cap = cap


class Channel(NamedTuple):
    rule_id: int
    kind: str
    stage: int = 0

    def sort_key(self) -> tuple[int, int, int]:
        return (self.rule_id, CHANNEL_KINDS.index(self.kind), self.stage)

    def __str__(self) -> str:
        return f"r{self.rule_id}.{self.kind}.{self.stage}"


# ---------------------------------------------------------------------------
# NFA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Nfa:
    n_states: int
    transitions: tuple[tuple[int, frozenset[int] | None, int], ...]
    start: int
    accepts: frozenset[int]


class _NfaBuilder:
    def __init__(self) -> None:
        self.n_states = 0
        self.transitions: list[tuple[int, frozenset[int] | None, int]] = []

    def state(self) -> int:
        self.n_states += 1
        return self.n_states - 1

    def edge(self, src: int, label: frozenset[int] | None, dst: int) -> None:
        self.transitions.append((src, label, dst))

    def fragment(self, node: Node) -> tuple[int, int]:
        """Thompson fragment for ``node``: (entry, exit) states."""
        if isinstance(node, (Literal, Dot, Class)):
            s, e = self.state(), self.state()
            if isinstance(node, Literal):
                label = frozenset((node.byte,))
            elif isinstance(node, Dot):
                label = ALL_BYTES
            else:
                label = node.bytes
            self.edge(s, label, e)
            return s, e
        if isinstance(node, Empty):
            s, e = self.state(), self.state()
            self.edge(s, None, e)
            return s, e
        if isinstance(node, Concat):
            return self.sequence(node.children)
        if isinstance(node, Union):
            s, e = self.state(), self.state()
            for child in node.children:
                cs, ce = self.fragment(child)
                self.edge(s, None, cs)
                self.edge(ce, None, e)
            return s, e
        if isinstance(node, Star):
            s, e = self.state(), self.state()
            cs, ce = self.fragment(node.child)
            self.edge(s, None, cs)
            self.edge(s, None, e)
            self.edge(ce, None, cs)
            self.edge(ce, None, e)
            return s, e
        if isinstance(node, Plus):
            cs, ce = self.fragment(node.child)
            e = self.state()
            self.edge(ce, None, cs)
            self.edge(ce, None, e)
            return cs, e
        if isinstance(node, Repeat):
            return self.sequence([node.child] * node.k)
        if isinstance(node, RepeatRange):
            s, cur = self.sequence([node.child] * node.k)
            end = self.state()
            for _ in range(node.m - node.k):
                self.edge(cur, None, end)
                cs, ce = self.fragment(node.child)
                self.edge(cur, None, cs)
                cur = ce
            self.edge(cur, None, end)
            return s, end
        raise TypeError(f"not a pattern node: {node!r}")

    def sequence(self, nodes) -> tuple[int, int]:
        if not nodes:
            return self.fragment(Empty())
        start, end = self.fragment(nodes[0])
        for node in nodes[1:]:
            s, e = self.fragment(node)
            self.edge(end, None, s)
            end = e
        return start, end

    def build(self, start: int, accepts) -> Nfa:
        return Nfa(self.n_states, tuple(self.transitions), start, frozenset(accepts))


def thompson_nfa(ast: Node) -> Nfa:
    """Thompson construction; counted repeats are unrolled by duplication."""
    builder = _NfaBuilder()
    start, end = builder.fragment(ast)
    return builder.build(start, [end])


# ---------------------------------------------------------------------------
# DFA
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dfa:
    table: np.ndarray  # (n_states, 256) int32, total
    start: int
    accept: np.ndarray  # (n_states,) bool

    @property
    def n_states(self) -> int:
        return int(self.table.shape[0])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Dfa)
            and self.start == other.start
            and np.array_equal(self.table, other.table)
            and np.array_equal(self.accept, other.accept)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class AnnotatedDfa:
    dfa: Dfa
    outputs: np.ndarray  # (n_states, n_channels) bool
    channels: tuple[Channel, ...]

    @property
    def n_states(self) -> int:
        return self.dfa.n_states

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def table(self) -> np.ndarray:
        return self.dfa.table

    @property
    def start(self) -> int:
        return self.dfa.start

    def channel_index(self, channel: Channel) -> int:
        return self.channels.index(channel)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, AnnotatedDfa)
            and self.channels == other.channels
            and self.dfa == other.dfa
            and np.array_equal(self.outputs, other.outputs)
        )

    __hash__ = None  # type: ignore[assignment]


def _annotated(table: np.ndarray, start: int, outputs: np.ndarray, channels) -> AnnotatedDfa:
    outputs = np.asarray(outputs, dtype=bool).reshape(table.shape[0], len(channels))
    return AnnotatedDfa(Dfa(table, start, outputs.any(axis=1)), outputs, tuple(channels))


def _byte_partition(labels) -> tuple[np.ndarray, list[frozenset[int]]]:
    """Coarsest byte partition respecting every label set.

    Returns the class id of each byte and, per distinct label, the set of
    class ids it covers.
    """
    distinct = list(dict.fromkeys(labels))
    signature: dict[tuple, int] = {}
    class_of = np.empty(ALPHABET_SIZE, dtype=np.int64)
    for b in range(ALPHABET_SIZE):
        key = tuple(b in label for label in distinct)
        class_of[b] = signature.setdefault(key, len(signature))
    return class_of, distinct


def _determinize(nfa: Nfa, tags: dict[int, tuple[int, ...]], n_channels: int, cap: int):
    """Subset construction.  Returns (table, outputs) with start state 0.

    ``tags`` maps NFA states to the output channels they assert.
    """
    eps: list[list[int]] = [[] for _ in range(nfa.n_states)]
    labelled: list[list[tuple[frozenset[int], int]]] = [[] for _ in range(nfa.n_states)]
    for src, label, dst in nfa.transitions:
        if label is None:
            eps[src].append(dst)
        else:
            labelled[src].append((label, dst))

    class_of, distinct = _byte_partition(label for edges in labelled for label, _ in edges)
    n_classes = int(class_of.max()) + 1
    label_classes = {label: frozenset(int(class_of[b]) for b in label) for label in distinct}
    moves: list[dict[int, list[int]]] = []
    for edges in labelled:
        by_class: dict[int, list[int]] = {}
        for label, dst in edges:
            for c in label_classes[label]:
                by_class.setdefault(c, []).append(dst)
        moves.append(by_class)

    closures: dict[int, frozenset[int]] = {}

    def closure_of(state: int) -> frozenset[int]:
        found = closures.get(state)
        if found is None:
            seen = {state}
            stack = [state]
            while stack:
                for nxt in eps[stack.pop()]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            found = closures[state] = frozenset(seen)
        return found

    def closure(states) -> frozenset[int]:
        out: set[int] = set()
        for s in states:
            out |= closure_of(s)
        return frozenset(out)

    start = closure([nfa.start])
    index = {start: 0}
    order = [start]
    rows: list[list[int]] = []
    queue = deque([start])
    while queue:
        current = queue.popleft()
        row = []
        for c in range(n_classes):
            targets: set[int] = set()
            for s in current:
                targets.update(moves[s].get(c, ()))
            nxt = closure(targets)
            idx = index.get(nxt)
            if idx is None:
                idx = index[nxt] = len(order)
                if idx >= cap:
                    raise StateCapExceeded(cap)
                order.append(nxt)
                queue.append(nxt)
            row.append(idx)
        rows.append(row)

    table = np.asarray(rows, dtype=np.int32).reshape(len(rows), n_classes)[:, class_of]
    outputs = np.zeros((len(order), n_channels), dtype=bool)
    for i, states in enumerate(order):
        for s in states:
            for ch in tags.get(s, ()):
                outputs[i, ch] = True
    return np.ascontiguousarray(table), outputs


def subset_construct(nfa: Nfa, cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """Determinize; the result is complete (a dead state appears if needed)."""
    tags = {s: (0,) for s in nfa.accepts}
    table, outputs = _determinize(nfa, tags, 1, cap)
    return Dfa(table, 0, outputs[:, 0].copy())


def _reachable(table: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(table.shape[0], dtype=bool)
    seen[start] = True
    frontier = np.array([start])
    while frontier.size:
        nxt = np.unique(table[frontier])
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return np.flatnonzero(seen)


def _canonical_order(table: np.ndarray, start: int) -> np.ndarray:
    """BFS numbering from the start state visiting bytes 0..255 in order."""
    order = [start]
    number = {start: 0}
    i = 0
    while i < len(order):
        row = table[order[i]]
        _, first = np.unique(row, return_index=True)
        for pos in np.sort(first):
            t = int(row[pos])
            if t not in number:
                number[t] = len(order)
                order.append(t)
        i += 1
    return np.asarray(order)


def _renumber(table: np.ndarray, start: int, labels: np.ndarray):
    order = _canonical_order(table, start)
    new_id = np.full(table.shape[0], -1, dtype=np.int64)
    new_id[order] = np.arange(order.size)
    new_table = new_id[table[order]].astype(np.int32)
    return np.ascontiguousarray(new_table), labels[order]


def _inverse(values: np.ndarray) -> np.ndarray:
    _, inv = np.unique(values, axis=0, return_inverse=True)
    return inv.reshape(-1)


def _moore_classes(table: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Coarsest partition that respects output labels and transitions."""
    columns = np.unique(table, axis=1)
    classes = _inverse(labels.reshape(labels.shape[0], -1))
    count = int(classes.max()) + 1
    while True:
        signature = np.column_stack([classes, classes[columns]])
        refined = _inverse(signature)
        new_count = int(refined.max()) + 1
        classes = refined
        if new_count == count:
            return classes
        count = new_count


def _minimize_parts(table: np.ndarray, start: int, labels: np.ndarray):
    keep = _reachable(table, start)
    remap = np.full(table.shape[0], -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    table = remap[table[keep]]
    labels = labels[keep]
    start = int(remap[start])

    classes = _moore_classes(table, labels)
    n = int(classes.max()) + 1
    rep = np.zeros(n, dtype=np.int64)
    rep[classes[::-1]] = np.arange(classes.size)[::-1]
    quotient = classes[table[rep]]
    return _renumber(quotient, int(classes[start]), labels[rep])


def minimize(dfa: Dfa | AnnotatedDfa) -> Dfa | AnnotatedDfa:
    """Minimal equivalent machine, states numbered canonically.

    Annotated DFAs are minimized as Moore machines: the initial partition is
    by output row, so states with different detector outputs never merge.
    Two language-equivalent inputs produce identical tables.
    """
    if isinstance(dfa, AnnotatedDfa):
        table, outputs = _minimize_parts(dfa.table, dfa.start, dfa.outputs)
        return _annotated(table, 0, outputs, dfa.channels)
    table, accept = _minimize_parts(dfa.table, dfa.start, dfa.accept)
    return Dfa(table, 0, accept.astype(bool))


def canonical(dfa: Dfa | AnnotatedDfa) -> Dfa | AnnotatedDfa:
    """Renumber reachable states in BFS order (isomorphism normal form)."""
    if isinstance(dfa, AnnotatedDfa):
        keep = _reachable(dfa.table, dfa.start)
        sub = _submachine(dfa.table, dfa.start, keep)
        table, outputs = _renumber(sub[0], sub[1], dfa.outputs[keep])
        return _annotated(table, 0, outputs, dfa.channels)
    keep = _reachable(dfa.table, dfa.start)
    sub = _submachine(dfa.table, dfa.start, keep)
    table, accept = _renumber(sub[0], sub[1], dfa.accept[keep])
    return Dfa(table, 0, accept)


def _submachine(table: np.ndarray, start: int, keep: np.ndarray):
    remap = np.full(table.shape[0], -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    return remap[table[keep]], int(remap[start])


def distinguish(a: Dfa | AnnotatedDfa, b: Dfa | AnnotatedDfa) -> bytes | None:
    """Shortest word on which the two machines differ, or None if equivalent.

    Plain DFAs are compared on acceptance, annotated ones on output rows.
    This is a breadth-first search of the product automaton.
    """
    label_a = a.outputs if isinstance(a, AnnotatedDfa) else a.accept[:, None]
    label_b = b.outputs if isinstance(b, AnnotatedDfa) else b.accept[:, None]
    if label_a.shape[1] != label_b.shape[1]:
        raise ValueError("machines have different output widths")
    start = (a.start, b.start)
    parent: dict[tuple[int, int], tuple[tuple[int, int], int] | None] = {start: None}
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        if not np.array_equal(label_a[pair[0]], label_b[pair[1]]):
            word = []
            while parent[pair] is not None:
                pair, byte = parent[pair]
                word.append(byte)
            return bytes(reversed(word))
        codes = a.table[pair[0]].astype(np.int64) * b.n_states + b.table[pair[1]]
        _, first = np.unique(codes, return_index=True)
        for byte in np.sort(first):
            nxt = (int(a.table[pair[0], byte]), int(b.table[pair[1], byte]))
            if nxt not in parent:
                parent[nxt] = (pair, int(byte))
                queue.append(nxt)
    return None


def run_dfa(dfa: Dfa | AnnotatedDfa, word: bytes) -> tuple[bool, np.ndarray]:
    """Run a word; returns (accepted, per-byte output trace).

    The trace has one row per consumed byte: the output row of the state
    reached (for a plain DFA, its accept bit).
    """
    labels = dfa.outputs if isinstance(dfa, AnnotatedDfa) else dfa.accept[:, None]
    table = dfa.table
    state = dfa.start
    visited = np.empty(len(word), dtype=np.int64)
    for i, byte in enumerate(word):
        state = table[state, byte]
        visited[i] = state
    accept = dfa.dfa.accept if isinstance(dfa, AnnotatedDfa) else dfa.accept
    return bool(accept[state]), labels[visited]


# ---------------------------------------------------------------------------
# Aho-Corasick
# ---------------------------------------------------------------------------

def aho_corasick(words, channels=None) -> AnnotatedDfa:
    """Keyword automaton: channel ``i`` is set in exactly the states reached
    when ``words[i]`` has just ended.

    The goto trie plus failure links is flattened into a complete table.
    States are trie nodes in BFS order (root = 0), so there are at most
    ``sum(len(w)) + 1`` of them.  Duplicate words share a node and both
    channels fire.
    """
    words = [bytes(w) for w in words]
    if any(not w for w in words):
        raise ValueError("Aho-Corasick words must be non-empty")
    if channels is None:
        channels = [Channel(i, CHAIN_WORD_END, 0) for i in range(len(words))]
    channels = tuple(channels)
    if len(channels) != len(words):
        raise ValueError("one channel per word required")

    goto: list[dict[int, int]] = [{}]
    emits: list[set[int]] = [set()]
    for i, word in enumerate(words):
        node = 0
        for byte in word:
            nxt = goto[node].get(byte)
            if nxt is None:
                nxt = len(goto)
                goto[node][byte] = nxt
                goto.append({})
                emits.append(set())
            node = nxt
        emits[node].add(i)

    # BFS renumbering keeps state ids independent of insertion order
    order = [0]
    for node in order:
        order.extend(goto[node][b] for b in sorted(goto[node]))
    number = {node: i for i, node in enumerate(order)}

    n = len(goto)
    table = np.zeros((n, ALPHABET_SIZE), dtype=np.int32)
    outputs = np.zeros((n, len(words)), dtype=bool)
    fail = [0] * n
    for node in order:
        idx = number[node]
        if node == 0:
            row = np.zeros(ALPHABET_SIZE, dtype=np.int32)
        else:
            row = table[number[fail[node]]].copy()
            outputs[idx] = outputs[number[fail[node]]]
        for i in emits[node]:
            outputs[idx, i] = True
        for byte, child in goto[node].items():
            if node != 0:
                fail[child] = order[int(table[number[fail[node]], byte])]
            row[byte] = number[child]
        table[idx] = row
    return _annotated(table, 0, outputs, channels)


# ---------------------------------------------------------------------------
# Block 1
# ---------------------------------------------------------------------------

def detector_specs(ruleset: Ruleset):
    """Channels of the block-1 automaton, split into regex and keyword detectors.

    Returns ``(regex, keywords)``: lists of ``(Channel, Node)`` and
    ``(Channel, bytes)``.
    """
    regex: list[tuple[Channel, Node]] = []
    keywords: list[tuple[Channel, bytes]] = []
    for rule in ruleset.rules:
        i = rule.rule_id
        counted = counted_prefix(rule.prefix) if ruleset.mode == DOUBLE_COUNTING else None
        if counted is None:
            regex.append((Channel(i, PREFIX_END, 0), rule.prefix))
        else:
            if counted.head is not None:
                regex.append((Channel(i, COUNT_PRE, 0), counted.head))
            for j, stage in enumerate(counted.stages):
                regex.append((Channel(i, COUNT_CLASS, j), Class(stage.members)))
                if stage.suffix:
                    keywords.append((Channel(i, COUNT_SUFFIX, j), stage.suffix))
        for j, word in enumerate(rule.chain):
            keywords.append((Channel(i, CHAIN_WORD_END, j), word))
        if rule.gap is not None:
            regex.append((Channel(i, GAP_FORBIDDEN, 0), Class(rule.gap.forbidden)))
    return regex, keywords


def suffix_detector(specs, cap: int = DEFAULT_STATE_CAP) -> AnnotatedDfa:
    """Determinized union of ``.*D`` detectors, one channel per spec."""
    builder = _NfaBuilder()
    start = builder.state()
    builder.edge(start, ALL_BYTES, start)
    tags: dict[int, tuple[int, ...]] = {}
    for ch, (_, node) in enumerate(specs):
        s, e = builder.fragment(node)
        builder.edge(start, None, s)
        tags[e] = tags.get(e, ()) + (ch,)
    nfa = builder.build(start, tags)
    table, outputs = _determinize(nfa, tags, len(specs), cap)
    return _annotated(table, 0, outputs, [c for c, _ in specs])


def product(a: AnnotatedDfa, b: AnnotatedDfa, cap: int = DEFAULT_STATE_CAP) -> AnnotatedDfa:
    """Reachable synchronous product; outputs are concatenated."""
    index = {(a.start, b.start): 0}
    pairs = [(a.start, b.start)]
    rows = []
    i = 0
    while i < len(pairs):
        x, y = pairs[i]
        codes = a.table[x].astype(np.int64) * b.n_states + b.table[y]
        uniq, inverse = np.unique(codes, return_inverse=True)
        ids = np.empty(uniq.size, dtype=np.int32)
        for j, code in enumerate(uniq):
            pair = divmod(int(code), b.n_states)
            idx = index.get(pair)
            if idx is None:
                idx = index[pair] = len(pairs)
                if idx >= cap:
                    raise StateCapExceeded(cap)
                pairs.append(pair)
            ids[j] = idx
        rows.append(ids[inverse.reshape(-1)])
        i += 1
    table = np.vstack(rows).astype(np.int32)
    xs = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
    ys = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
    outputs = np.hstack([a.outputs[xs], b.outputs[ys]])
    return _annotated(table, 0, outputs, a.channels + b.channels)


def build_block1(ruleset: Ruleset, cap: int = DEFAULT_STATE_CAP) -> AnnotatedDfa:
    """Block-1 detector DFA of a ruleset.

    Regex detectors (``.*R`` prefixes, forbidden-byte and counted-class
    detectors) are determinized together; chain words go through
    Aho-Corasick; the two are combined by product and Moore-minimized.
    Channels are ordered by (rule, kind, stage).
    """
    regex, keywords = detector_specs(ruleset)
    parts = []
    if regex:
        parts.append(suffix_detector(regex, cap))
    if keywords:
        parts.append(aho_corasick([w for _, w in keywords], [c for c, _ in keywords]))
    machine = parts[0] if len(parts) == 1 else product(parts[0], parts[1], cap)
    order = sorted(range(machine.n_channels), key=lambda c: machine.channels[c].sort_key())
    machine = _annotated(
        machine.table, machine.start, machine.outputs[:, order], [machine.channels[c] for c in order]
    )
    return minimize(machine)


def describe_bytes(members) -> str:
    """Compact human label for a byte set, e.g. ``a-d,x,\\x00``."""
    members = set(members)
    if len(members) == ALPHABET_SIZE:
        return "any"
    negate = len(members) > ALPHABET_SIZE // 2
    shown = set(range(ALPHABET_SIZE)) - members if negate else members
    parts = []
    for low, high in byte_ranges(shown):
        text = _show_byte(low) if low == high else f"{_show_byte(low)}-{_show_byte(high)}"
        parts.append(text)
    body = ",".join(parts)
    return f"^{body}" if negate else body


def _show_byte(b: int) -> str:
    if 0x21 <= b < 0x7F and chr(b) not in ',-^\\"':
        return chr(b)
    return f"\\x{b:02x}"
