"""Parser for the PCRE subset used by signature rules.

Patterns are byte strings.  The supported syntax is deliberately small:

    literals and ``\\``-escaped metacharacters, ``\\xHH``, ``\\d \\w \\s`` (and
    their negations), ``.``, bracket classes with ranges and POSIX names,
    ``[^...]`` (``[¬...]`` is accepted as a synonym), ``|``, ``*``, ``+``,
    ``?``, ``{n}``, ``{n,m}`` and grouping with ``(...)`` or ``(?:...)``.

Anything else PCRE knows about (anchors, backreferences, lookaround, lazy or
possessive quantifiers, open-ended ``{n,}``) is rejected with a positioned
:class:`PatternError` instead of being approximated.

``.`` matches every byte, newline included: signatures run over raw streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

ALPHABET_SIZE = 256
ALL_BYTES = frozenset(range(ALPHABET_SIZE))
MAX_REPEAT = 65535

_NEGATION_SIGN = "¬".encode()


class PatternError(ValueError):
    """Syntax error carrying the byte offset where parsing stopped."""

    def __init__(self, reason: str, offset: int):
        super().__init__(f"{reason} at offset {offset}")
        self.reason = reason
        self.offset = offset


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    # Source span is metadata: two trees are equal iff their structure is.
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Empty(Node):
    pass


@dataclass(frozen=True)
class Literal(Node):
    byte: int


@dataclass(frozen=True)
class Dot(Node):
    pass


@dataclass(frozen=True)
class Class(Node):
    members: frozenset[int]
    negated: bool = False

    @property
    def bytes(self) -> frozenset[int]:
        """The byte set after resolving negation against the full alphabet."""
        return ALL_BYTES - self.members if self.negated else self.members


@dataclass(frozen=True)
class Concat(Node):
    children: tuple[Node, ...]


@dataclass(frozen=True)
class Union(Node):
    children: tuple[Node, ...]


@dataclass(frozen=True)
class Star(Node):
    child: Node


@dataclass(frozen=True)
class Plus(Node):
    child: Node


@dataclass(frozen=True)
class Repeat(Node):
    child: Node
    k: int


@dataclass(frozen=True)
class RepeatRange(Node):
    child: Node
    k: int
    m: int


def children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (Concat, Union)):
        return node.children
    if isinstance(node, (Star, Plus, Repeat, RepeatRange)):
        return (node.child,)
    return ()


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal; for parsed trees this is source order."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(children(current)))


def byte_set(node: Node) -> frozenset[int] | None:
    """Bytes matched by a single-character node, or None for anything wider."""
    if isinstance(node, Literal):
        return frozenset((node.byte,))
    if isinstance(node, Dot):
        return ALL_BYTES
    if isinstance(node, Class):
        return node.bytes
    return None


def nullable(node: Node) -> bool:
    """True if the node's language contains the empty word."""
    if isinstance(node, (Empty, Star)):
        return True
    if isinstance(node, (Literal, Dot, Class)):
        return False
    if isinstance(node, Concat):
        return all(nullable(c) for c in node.children)
    if isinstance(node, Union):
        return any(nullable(c) for c in node.children)
    if isinstance(node, Plus):
        return nullable(node.child)
    if isinstance(node, (Repeat, RepeatRange)):
        return node.k == 0 or nullable(node.child)
    raise TypeError(f"not a pattern node: {node!r}")


def expanded_size(node: Node) -> int:
    """Node count once every counted repeat is unrolled."""
    if isinstance(node, (Concat, Union)):
        return 1 + sum(expanded_size(c) for c in node.children)
    if isinstance(node, (Star, Plus)):
        return 1 + expanded_size(node.child)
    if isinstance(node, Repeat):
        return 1 + max(node.k, 1) * expanded_size(node.child)
    if isinstance(node, RepeatRange):
        return 1 + max(node.m, 1) * expanded_size(node.child)
    return 1


def concat(items: list[Node] | tuple[Node, ...]) -> Node:
    """Build a canonical concatenation: flattened, without Empty items."""
    flat: list[Node] = []
    for item in items:
        if isinstance(item, Concat):
            flat.extend(item.children)
        elif not isinstance(item, Empty):
            flat.append(item)
    if not flat:
        return Empty()
    if len(flat) == 1:
        return flat[0]
    return Concat(tuple(flat), span=(flat[0].span[0], flat[-1].span[1]))


def union(items: list[Node] | tuple[Node, ...]) -> Node:
    flat: list[Node] = []
    for item in items:
        flat.extend(item.children if isinstance(item, Union) else (item,))
    if len(flat) == 1:
        return flat[0]
    return Union(tuple(flat), span=(flat[0].span[0], flat[-1].span[1]))


def literal_word(word: bytes) -> Node:
    return concat([Literal(b) for b in word])


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_DIGITS = frozenset(range(ord("0"), ord("9") + 1))
_UPPER = frozenset(range(ord("A"), ord("Z") + 1))
_LOWER = frozenset(range(ord("a"), ord("z") + 1))
_SPACE = frozenset(b" \t\n\r\f\v")
_WORD = _DIGITS | _UPPER | _LOWER | {ord("_")}
_PUNCT = frozenset(b"!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")

_POSIX = {
    b"alpha": _UPPER | _LOWER,
    b"digit": _DIGITS,
    b"alnum": _UPPER | _LOWER | _DIGITS,
    b"upper": _UPPER,
    b"lower": _LOWER,
    b"space": _SPACE,
    b"xdigit": _DIGITS | frozenset(b"abcdefABCDEF"),
    b"punct": _PUNCT,
    b"word": _WORD,
}

_CLASS_ESCAPES = {
    ord("d"): (_DIGITS, False),
    ord("D"): (_DIGITS, True),
    ord("w"): (_WORD, False),
    ord("W"): (_WORD, True),
    ord("s"): (_SPACE, False),
    ord("S"): (_SPACE, True),
}

_CONTROL_ESCAPES = {
    ord("n"): 0x0A,
    ord("t"): 0x09,
    ord("r"): 0x0D,
    ord("f"): 0x0C,
    ord("v"): 0x0B,
    ord("a"): 0x07,
    ord("e"): 0x1B,
}

_ANCHOR_ESCAPES = frozenset(b"bBAZzG")


class _Parser:
    def __init__(self, text: bytes):
        self.text = text
        self.pos = 0

    def peek(self) -> int | None:
        return self.text[self.pos] if self.pos < len(self.text) else None

    def error(self, reason: str, offset: int | None = None) -> PatternError:
        return PatternError(reason, self.pos if offset is None else offset)

    def parse(self) -> Node:
        node = self.union()
        if self.pos < len(self.text):
            # union() only stops early on an unmatched ')'
            raise self.error("unbalanced parenthesis")
        return node

    def union(self) -> Node:
        start = self.pos
        alternatives = [self.concat()]
        while self.peek() == ord("|"):
            self.pos += 1
            alternatives.append(self.concat())
        if len(alternatives) == 1:
            return alternatives[0]
        node = union(alternatives)
        return Union(node.children, span=(start, self.pos)) if isinstance(node, Union) else node

    def concat(self) -> Node:
        start = self.pos
        items: list[Node] = []
        while self.peek() is not None and self.peek() not in b"|)":
            items.append(self.quantified())
        node = concat(items)
        if isinstance(node, Empty):
            return Empty(span=(start, start))
        return node

    def quantified(self) -> Node:
        start = self.pos
        node = self.atom()
        quantified = False
        while True:
            ch = self.peek()
            if ch is None or ch not in b"*+?{":
                return node
            if quantified:
                if ch == ord("?"):
                    raise self.error("lazy quantifier unsupported")
                if ch == ord("+"):
                    raise self.error("possessive quantifier unsupported")
                raise self.error("multiple repeat")
            quantified = True
            if ch == ord("*"):
                self.pos += 1
                node = Star(node, span=(start, self.pos))
            elif ch == ord("+"):
                self.pos += 1
                node = Plus(node, span=(start, self.pos))
            elif ch == ord("?"):
                self.pos += 1
                node = RepeatRange(node, 0, 1, span=(start, self.pos))
            else:
                k, m = self.bounds()
                if m is None:
                    node = Repeat(node, k, span=(start, self.pos))
                else:
                    node = RepeatRange(node, k, m, span=(start, self.pos))

    def bounds(self) -> tuple[int, int | None]:
        brace = self.pos
        self.pos += 1
        k = self.number()
        if k is None:
            raise self.error("malformed repeat", brace)
        m = None
        if self.peek() == ord(","):
            self.pos += 1
            m = self.number()
            if m is None:
                if self.peek() == ord("}"):
                    raise self.error("open-ended repeat unsupported", brace)
                raise self.error("malformed repeat", brace)
        if self.peek() != ord("}"):
            raise self.error("malformed repeat", brace)
        self.pos += 1
        if k > MAX_REPEAT or (m is not None and m > MAX_REPEAT):
            raise self.error("repeat bound too large", brace)
        if m is not None and k > m:
            raise self.error("bad repeat bounds", brace)
        return k, m

    def number(self) -> int | None:
        start = self.pos
        while self.peek() is not None and self.peek() in _DIGITS:
            self.pos += 1
        if self.pos == start:
            return None
        return int(self.text[start:self.pos])

    def atom(self) -> Node:
        start = self.pos
        ch = self.peek()
        if ch == ord("("):
            self.pos += 1
            if self.peek() == ord("?"):
                if self.text[self.pos:self.pos + 2] != b"?:":
                    raise self.error("lookaround and inline flags unsupported", start)
                self.pos += 2
            inner = self.union()
            if self.peek() != ord(")"):
                raise self.error("unbalanced parenthesis", start)
            self.pos += 1
            if isinstance(inner, Empty):
                return Empty(span=(start, self.pos))
            return inner
        if ch == ord("["):
            return self.bracket()
        if ch == ord("."):
            self.pos += 1
            return Dot(span=(start, self.pos))
        if ch == ord("\\"):
            return self.escape()
        if ch in b"*+?{":
            raise self.error("nothing to repeat")
        if ch in b"^$":
            raise self.error("anchors unsupported")
        if self.text.startswith(_NEGATION_SIGN + b"(", self.pos):
            # the complement of a multi-byte word has no single-byte reading
            raise self.error("negation of a multi-byte word unsupported (use [^c] for one byte)")
        self.pos += 1
        return Literal(ch, span=(start, self.pos))

    def escape(self) -> Node:
        start = self.pos
        self.pos += 1
        ch = self.peek()
        if ch is None:
            raise self.error("trailing backslash", start)
        self.pos += 1
        if ch in _CLASS_ESCAPES:
            members, negated = _CLASS_ESCAPES[ch]
            return Class(members, negated, span=(start, self.pos))
        return Literal(self.escaped_byte(ch, start), span=(start, self.pos))

    def escaped_byte(self, ch: int, start: int) -> int:
        """Resolve a single-byte escape whose letter has been consumed."""
        if ch == ord("x"):
            digits = self.text[self.pos:self.pos + 2]
            if len(digits) != 2 or not all(d in _POSIX[b"xdigit"] for d in digits):
                raise self.error("malformed \\x escape", start)
            self.pos += 2
            return int(digits, 16)
        if ch in _CONTROL_ESCAPES:
            return _CONTROL_ESCAPES[ch]
        if ch == ord("0"):
            return 0
        if ch in _DIGITS:
            raise self.error("backreferences unsupported", start)
        if ch in _ANCHOR_ESCAPES:
            raise self.error("anchors unsupported", start)
        if ch in _WORD:
            raise self.error(f"unsupported escape \\{chr(ch)}", start)
        return ch

    def bracket(self) -> Node:
        start = self.pos
        self.pos += 1
        negated = False
        if self.peek() == ord("^"):
            negated = True
            self.pos += 1
        elif self.text.startswith(_NEGATION_SIGN, self.pos):
            negated = True
            self.pos += len(_NEGATION_SIGN)
        members: set[int] = set()
        first = True
        while True:
            ch = self.peek()
            if ch is None:
                raise self.error("unterminated class", start)
            if ch == ord("]") and not first:
                self.pos += 1
                break
            first = False
            if ch == ord("[") and self.text[self.pos + 1:self.pos + 2] == b":":
                end = self.text.find(b":]", self.pos + 2)
                name = self.text[self.pos + 2:end] if end >= 0 else b""
                if name not in _POSIX:
                    raise self.error("unknown POSIX class")
                members |= _POSIX[name]
                self.pos = end + 2
                continue
            low = self.class_item()
            if isinstance(low, frozenset):
                members |= low
                continue
            if self.peek() == ord("-") and self.text[self.pos + 1:self.pos + 2] not in (b"]", b""):
                dash = self.pos
                self.pos += 1
                high = self.class_item()
                if isinstance(high, frozenset):
                    raise self.error("bad class range", dash)
                if high < low:
                    raise self.error("bad class range", dash)
                members.update(range(low, high + 1))
            else:
                members.add(low)
        node = Class(frozenset(members), negated, span=(start, self.pos))
        if not node.bytes:
            raise self.error("empty class", start)
        return node

    def class_item(self) -> int | frozenset[int]:
        ch = self.peek()
        if ch != ord("\\"):
            self.pos += 1
            return ch
        start = self.pos
        self.pos += 1
        ch = self.peek()
        if ch is None:
            raise self.error("unterminated class", start)
        self.pos += 1
        if ch in _CLASS_ESCAPES:
            members, negated = _CLASS_ESCAPES[ch]
            return ALL_BYTES - members if negated else members
        if ch == ord("b"):
            return 0x08
        return self.escaped_byte(ch, start)


def parse_pattern(text: bytes | str) -> Node:
    """Parse a pattern into its AST.

    >>> parse_pattern(b"[^x]{3,5}")
    RepeatRange(child=Class(members=frozenset({120}), negated=True), k=3, m=5)
    """
    if isinstance(text, str):
        text = text.encode()
    return _Parser(bytes(text)).parse()


# ---------------------------------------------------------------------------
# Unparser
# ---------------------------------------------------------------------------

_META = frozenset(b"\\.[]()|*+?{}^$#")
_CLASS_META = frozenset(b"\\]^-[")


def _printable(b: int) -> bool:
    return 0x20 <= b < 0x7F


def _escape_literal(b: int) -> bytes:
    if b in _META:
        return b"\\" + bytes((b,))
    if _printable(b):
        return bytes((b,))
    return b"\\x%02x" % b


def _escape_class_byte(b: int) -> bytes:
    if b in _CLASS_META:
        return b"\\" + bytes((b,))
    if _printable(b) and b != 0x20:
        return bytes((b,))
    return b"\\x%02x" % b


def byte_ranges(members) -> list[tuple[int, int]]:
    ranges: list[tuple[int, int]] = []
    for b in sorted(members):
        if ranges and ranges[-1][1] == b - 1:
            ranges[-1] = (ranges[-1][0], b)
        else:
            ranges.append((b, b))
    return ranges


def _render_class(members: frozenset[int], negated: bool) -> bytes:
    parts = []
    for low, high in byte_ranges(members):
        if low == high:
            parts.append(_escape_class_byte(low))
        elif high == low + 1:
            parts.append(_escape_class_byte(low) + _escape_class_byte(high))
        else:
            parts.append(_escape_class_byte(low) + b"-" + _escape_class_byte(high))
    return b"[" + (b"^" if negated else b"") + b"".join(parts) + b"]"


def _operand(node: Node) -> bytes:
    if isinstance(node, Empty):
        return b"()"
    if isinstance(node, (Literal, Dot, Class)):
        return _unparse(node, 2)
    return b"(" + _unparse(node, 0) + b")"


def _unparse(node: Node, level: int) -> bytes:
    # level: 0 = anywhere, 1 = inside a concatenation
    if isinstance(node, Empty):
        return b"()" if level > 0 else b""
    if isinstance(node, Literal):
        return _escape_literal(node.byte)
    if isinstance(node, Dot):
        return b"."
    if isinstance(node, Class):
        return _render_class(node.members, node.negated)
    if isinstance(node, Concat):
        return b"".join(_unparse(c, 1) for c in node.children)
    if isinstance(node, Union):
        text = b"|".join(_unparse(c, 0) for c in node.children)
        return b"(" + text + b")" if level > 0 else text
    if isinstance(node, Star):
        return _operand(node.child) + b"*"
    if isinstance(node, Plus):
        return _operand(node.child) + b"+"
    if isinstance(node, Repeat):
        return _operand(node.child) + b"{%d}" % node.k
    if isinstance(node, RepeatRange):
        return _operand(node.child) + b"{%d,%d}" % (node.k, node.m)
    raise TypeError(f"not a pattern node: {node!r}")


def unparse(node: Node) -> bytes:
    """Render an AST back to pattern text that parses to an equal tree."""
    return _unparse(node, 0)


# ---------------------------------------------------------------------------
# Blow-up signs
# ---------------------------------------------------------------------------

DOT_STAR = "DotStar"
DOT_PLUS = "DotPlus"
DOT_REPEAT = "DotRepeat"
NEG_CLASS_REPEAT = "NegClassRepeat"
DOT_REPEAT_RANGE = "DotRepeatRange"
NEG_CLASS_REPEAT_RANGE = "NegClassRepeatRange"


@dataclass(frozen=True)
class BlowupSign:
    kind: str
    span: tuple[int, int]

    @property
    def offset(self) -> int:
        return self.span[0]

    def __str__(self) -> str:
        return f"{self.kind}@{self.offset}"


def blowup_kind(node: Node) -> str | None:
    """Sign kind of this exact node, if it is one of the six blow-up signs."""
    child = getattr(node, "child", None)
    dot = isinstance(child, Dot)
    neg = isinstance(child, Class) and child.negated
    if isinstance(node, Star) and dot:
        return DOT_STAR
    if isinstance(node, Plus) and dot:
        return DOT_PLUS
    if isinstance(node, Repeat):
        return DOT_REPEAT if dot else NEG_CLASS_REPEAT if neg else None
    if isinstance(node, RepeatRange):
        return DOT_REPEAT_RANGE if dot else NEG_CLASS_REPEAT_RANGE if neg else None
    return None


def detect_blowup_signs(ast: Node) -> list[BlowupSign]:
    """Every ``.*  .+  .{n}  .{n,m}  [^a]{n}  [^a]{n,m}`` in source order."""
    signs = [BlowupSign(kind, node.span) for node in walk(ast) if (kind := blowup_kind(node))]
    return sorted(signs, key=lambda s: s.span)
