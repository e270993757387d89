"""Decomposition of signature patterns into prefix / gap / chain form.

A rule ``.*R.*w1.*w2.*...wk.*`` splits into a blow-up-free prefix ``R`` and a
chain of literal words.  The gap form ``.*R[^c]{k,m}w1.*w2...`` additionally
carries a :class:`GapSpec` between ``R`` and the first word.  Leading and
trailing ``.*`` are optional since every rule is unanchored.
"""

from __future__ import annotations

from dataclasses import dataclass

from .pattern import (
    ALPHABET_SIZE,
    Class,
    Concat,
    Dot,
    Empty,
    Literal,
    Node,
    PatternError,
    Repeat,
    RepeatRange,
    Star,
    blowup_kind,
    byte_set,
    concat,
    detect_blowup_signs,
    literal_word,
    nullable,
    parse_pattern,
    union,
    unparse,
    walk,
)

PLAIN = "plain"
DOUBLE_COUNTING = "double_counting"
MODES = (PLAIN, DOUBLE_COUNTING)


class ShapeError(ValueError):
    """The pattern parses but is not one of the supported rule shapes."""

    def __init__(self, reason: str, offset: int | None = None):
        super().__init__(reason if offset is None else f"{reason} at offset {offset}")
        self.reason = reason
        self.offset = offset


class RulesetError(ValueError):
    """Aggregated per-line errors from :func:`parse_ruleset`."""

    def __init__(self, errors: list[tuple[int | None, str]]):
        self.errors = errors
        lines = [msg if line is None else f"line {line}: {msg}" for line, msg in errors]
        super().__init__("; ".join(lines))


@dataclass(frozen=True)
class GapSpec:
    forbidden: frozenset[int]
    k: int
    m: int
    m_prime: int


@dataclass(frozen=True)
class DecomposedRule:
    rule_id: int
    prefix: Node
    gap: GapSpec | None
    chain: tuple[bytes, ...]
    mode: str = PLAIN
    source: bytes = b""


@dataclass(frozen=True)
class CountStage:
    """One character-scoped counted repeat ``X{k,m}`` followed by a literal."""

    members: frozenset[int]
    k: int
    m: int
    suffix: bytes


@dataclass(frozen=True)
class CountedPrefix:
    """``head X1{k1,m1} s1 X2{k2,m2} s2 ...`` split of a double-counting prefix.

    ``head`` is None when the prefix starts with a counted repeat.
    """

    head: Node | None
    stages: tuple[CountStage, ...]


@dataclass(frozen=True)
class Ruleset:
    rules: tuple[DecomposedRule, ...]
    mode: str = PLAIN
    alphabet_size: int = ALPHABET_SIZE

    @property
    def n(self) -> int:
        return len(self.rules)

    @property
    def m(self) -> int:
        """Longest prefix pattern text or chain word over all rules."""
        longest = 0
        for rule in self.rules:
            longest = max(longest, len(unparse(rule.prefix)), *(len(w) for w in rule.chain))
        return longest


def _is_dot_star(node: Node) -> bool:
    return isinstance(node, Star) and isinstance(node.child, Dot)


def _is_gap(node: Node) -> bool:
    return (
        isinstance(node, (Repeat, RepeatRange))
        and isinstance(node.child, Class)
        and node.child.negated
    )


def _word_of(items: list[Node]) -> bytes | None:
    """Literal bytes spelled by the items, or None if any item is not literal."""
    out = bytearray()
    for item in items:
        single = byte_set(item)
        if single is not None and len(single) == 1:
            out.extend(single)
            continue
        if isinstance(item, Repeat):
            inner = _word_of([item.child])
            if inner is None:
                return None
            out.extend(inner * item.k)
            continue
        return None
    return bytes(out)


def _first_non_literal(items: list[Node]) -> Node:
    for item in items:
        if _word_of([item]) is None:
            return item
    raise AssertionError("no non-literal item")


def _kind_name(node: Node) -> str:
    return blowup_kind(node) or type(node).__name__


def _is_counted(node: Node) -> bool:
    return isinstance(node, (Repeat, RepeatRange)) and byte_set(node.child) is not None


def counted_prefix(prefix: Node) -> CountedPrefix | None:
    """Split a double-counting prefix at its top-level character repeats.

    Returns None when the prefix holds no top-level ``X{k}``/``X{k,m}``.
    Raises :class:`ShapeError` when the text between two counted repeats (or
    after the last one) is not a literal word.
    """
    items = list(prefix.children) if isinstance(prefix, Concat) else [prefix]
    positions = [i for i, item in enumerate(items) if _is_counted(item)]
    if not positions:
        return None
    head_items = items[: positions[0]]
    head = concat(head_items) if head_items else None
    if head is not None and nullable(head):
        raise ShapeError("prefix head before a counted repeat matches the empty word", head.span[0])
    stages = []
    bounds = positions + [len(items)]
    for idx, pos in enumerate(positions):
        rep = items[pos]
        between = items[pos + 1: bounds[idx + 1]]
        suffix = _word_of(between)
        if suffix is None:
            bad = _first_non_literal(between)
            raise ShapeError("text after a counted repeat must be a literal word", bad.span[0])
        m = rep.k if isinstance(rep, Repeat) else rep.m
        stages.append(CountStage(byte_set(rep.child), rep.k, m, suffix))
    return CountedPrefix(head, tuple(stages))


def _check_prefix(prefix: Node, mode: str) -> None:
    if mode == PLAIN:
        signs = detect_blowup_signs(prefix)
        if signs:
            raise ShapeError(f"blow-up sign {signs[0].kind} in prefix", signs[0].offset)
    else:
        top = list(prefix.children) if isinstance(prefix, Concat) else [prefix]
        allowed = {id(item) for item in top if _is_counted(item)}
        for node in walk(prefix):
            kind = blowup_kind(node)
            if kind and id(node) not in allowed:
                raise ShapeError(f"blow-up sign {kind} in prefix", node.span[0])
        counted_prefix(prefix)
    if nullable(prefix):
        raise ShapeError("prefix matches the empty word", prefix.span[0])


def decompose_rule(ast: Node, mode: str = PLAIN, rule_id: int = 0, source: bytes = b"") -> DecomposedRule:
    """Split a parsed rule into prefix, optional gap and chain words.

    >>> decompose_rule(parse_pattern(b".*ab.*cd.*")).chain
    (b'cd',)
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    items = list(ast.children) if isinstance(ast, Concat) else [ast]
    if isinstance(ast, Empty):
        raise ShapeError("empty rule", 0)
    if items and _is_dot_star(items[0]):
        items = items[1:]
    if items and _is_dot_star(items[-1]):
        items = items[:-1]

    segments: list[list[Node]] = [[]]
    separators: list[Node] = []
    for item in items:
        if _is_dot_star(item):
            segments.append([])
            separators.append(item)
        else:
            segments.append(segments.pop() + [item])

    head = segments[0]
    words: list[bytes] = []
    for sep, segment in zip(separators, segments[1:]):
        if not segment:
            raise ShapeError("empty chain word", sep.span[1])
        word = _word_of(segment)
        if word is None:
            bad = _first_non_literal(segment)
            raise ShapeError(f"chain word must be a literal word, found {_kind_name(bad)}", bad.span[0])
        words.append(word)

    gap = None
    # gap form: R [^c]{k,m} beta, with beta the literal tail of the head segment
    tail = len(head)
    while tail > 0 and _word_of([head[tail - 1]]) is not None:
        tail -= 1
    if 0 < tail < len(head) and _is_gap(head[tail - 1]):
        rep = head[tail - 1]
        beta = _word_of(head[tail:])
        k = rep.k
        m = rep.k if isinstance(rep, Repeat) else rep.m
        forbidden = rep.child.members if rep.child.negated else frozenset()
        gap = GapSpec(frozenset(forbidden), k, m, m + len(beta) + 1)
        words.insert(0, beta)
        head = head[: tail - 1]
    elif tail > 0 and tail == len(head) and _is_gap(head[-1]) and not words:
        raise ShapeError("gap must be followed by a literal word", head[-1].span[1])

    if not head:
        at = items[0].span[0] if items else 0
        raise ShapeError("empty prefix", at)
    if not words:
        raise ShapeError("rule has no chain word (expected .*R.*w.*)", head[-1].span[1])

    prefix = concat(head)
    _check_prefix(prefix, mode)
    return DecomposedRule(rule_id, prefix, gap, tuple(words), mode, source)


def recompose(rule: DecomposedRule) -> Node:
    """Rebuild an unanchored pattern equivalent to the decomposed rule."""
    dot_star = Star(Dot())
    items: list[Node] = [dot_star, rule.prefix]
    words = list(rule.chain)
    if rule.gap is not None:
        gap_class = Class(rule.gap.forbidden, negated=True)
        if rule.gap.k == rule.gap.m:
            items.append(Repeat(gap_class, rule.gap.k))
        else:
            items.append(RepeatRange(gap_class, rule.gap.k, rule.gap.m))
        items.append(literal_word(words.pop(0)))
    for word in words:
        items += [dot_star, literal_word(word)]
    items.append(dot_star)
    return concat(items)


def union_pattern(ruleset: Ruleset) -> Node:
    """The whole ruleset as one classical pattern (the blow-up baseline)."""
    return union([recompose(rule) for rule in ruleset.rules])


def _mode_directive(line: bytes) -> str | None:
    text = line.strip()
    if not text.startswith(b"mode="):
        return None
    return text[5:].decode("ascii", "replace").strip()


def parse_ruleset(text: bytes | str, mode: str | None = None) -> Ruleset:
    """Parse a ruleset file: one pattern per line, ``#`` comments.

    The first non-comment line may be ``mode=plain`` or
    ``mode=double_counting``; an explicit ``mode`` argument overrides it.
    """
    if isinstance(text, str):
        text = text.encode()
    errors: list[tuple[int | None, str]] = []
    entries: list[tuple[int, bytes]] = []
    header_mode = None
    seen_pattern = False
    for lineno, raw in enumerate(text.split(b"\n"), start=1):
        line = raw[:-1] if raw.endswith(b"\r") else raw
        stripped = line.strip()
        if not stripped or stripped.startswith(b"#"):
            continue
        directive = _mode_directive(line)
        if directive is not None and not seen_pattern and header_mode is None:
            if directive not in MODES:
                errors.append((lineno, f"unknown mode {directive!r}"))
            header_mode = directive
            continue
        seen_pattern = True
        entries.append((lineno, line))

    effective = mode or (header_mode if header_mode in MODES else PLAIN)
    if mode is not None and mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    rules = []
    for lineno, line in entries:
        try:
            ast = parse_pattern(line)
            rules.append(decompose_rule(ast, effective, len(rules), line))
        except (PatternError, ShapeError) as exc:
            errors.append((lineno, str(exc)))
    if errors:
        raise RulesetError(errors)
    if not rules:
        raise RulesetError([(None, "empty ruleset")])
    return Ruleset(tuple(rules), effective)


def ruleset_text(ruleset: Ruleset) -> bytes:
    """Serialize a ruleset back to the line format."""
    lines = [b"mode=" + ruleset.mode.encode()]
    for rule in ruleset.rules:
        lines.append(rule.source or unparse(recompose(rule)))
    return b"\n".join(lines) + b"\n"


def make_ruleset(patterns, mode: str = PLAIN) -> Ruleset:
    """Build a ruleset from an iterable of pattern strings."""
    rules = []
    for i, pattern in enumerate(patterns):
        if isinstance(pattern, str):
            pattern = pattern.encode()
        rules.append(decompose_rule(parse_pattern(pattern), mode, i, pattern))
    if not rules:
        raise RulesetError([(None, "empty ruleset")])
    return Ruleset(tuple(rules), mode)
