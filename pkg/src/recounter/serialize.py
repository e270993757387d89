"""Compiled-machine file format.

Layout, all integers little-endian::

    magic "RCTR" | version u32 | alphabet u32 | states u32 | start u32 | channels u32
    transition table: states * alphabet u32, state-major
    outputs: per state, ceil(channels / 8) bytes, channel c at bit c % 8 of byte c // 8
    channel directory: per channel, rule u32 | kind u8 | stage u32
    rules u32 | window mode u8 | units u32
    unit table: per unit, rule u32 | stage u32 | mode u8 | presets 3 * u32 | word length u32

Everything after the output bits extends the minimal layout so that a loaded
machine is identical to the compiled one.  Writing a loaded machine gives
back the same bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .automata import CHANNEL_KINDS, Channel, _annotated
from .machine import UNIT_MODES, WINDOW_MODES, CounterMachine, CounterUnit
from .pattern import ALPHABET_SIZE

MAGIC = b"RCTR"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIIII")
_CHANNEL = struct.Struct("<IBI")
_TRAILER = struct.Struct("<IBI")
_UNIT = struct.Struct("<IIBIIII")


class MachineFormatError(ValueError):
    """The bytes are not a machine file this version can read."""


def dump_machine(machine: CounterMachine) -> bytes:
    block1 = machine.block1
    n_states, n_channels = block1.n_states, block1.n_channels
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, ALPHABET_SIZE, n_states, block1.start, n_channels)]
    parts.append(np.ascontiguousarray(block1.table, dtype="<u4").tobytes())
    if n_channels:
        parts.append(np.packbits(block1.outputs, axis=1, bitorder="little").tobytes())
    for ch in block1.channels:
        parts.append(_CHANNEL.pack(ch.rule_id, CHANNEL_KINDS.index(ch.kind), ch.stage))
    parts.append(_TRAILER.pack(machine.n_rules, WINDOW_MODES.index(machine.window_mode), len(machine.units)))
    for u in machine.units:
        parts.append(_UNIT.pack(u.rule_id, u.stage, UNIT_MODES.index(u.mode), *u.presets, u.word_len))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.at = 0

    def take(self, size: int, what: str) -> memoryview:
        if self.at + size > len(self.data):
            raise MachineFormatError(f"truncated file while reading {what} at offset {self.at}")
        chunk = self.data[self.at: self.at + size]
        self.at += size
        return chunk

    def unpack(self, fmt: struct.Struct, what: str) -> tuple:
        return fmt.unpack(self.take(fmt.size, what))


def load_machine(data: bytes) -> CounterMachine:
    reader = _Reader(bytes(data))
    magic, version, alphabet, n_states, start, n_channels = reader.unpack(_HEADER, "header")
    if magic != MAGIC:
        raise MachineFormatError(f"bad magic {bytes(magic)!r}")
    if version != FORMAT_VERSION:
        raise MachineFormatError(f"unsupported format version {version}")
    if alphabet != ALPHABET_SIZE:
        raise MachineFormatError(f"unsupported alphabet size {alphabet}")
    if n_states == 0 or start >= n_states:
        raise MachineFormatError("bad state count or start state")

    raw = reader.take(n_states * alphabet * 4, "transition table")
    table = np.frombuffer(raw, dtype="<u4").reshape(n_states, alphabet)
    if table.size and int(table.max()) >= n_states:
        raise MachineFormatError("transition to a state out of range")
    width = (n_channels + 7) // 8
    if n_channels:
        packed = np.frombuffer(reader.take(n_states * width, "outputs"), dtype=np.uint8)
        outputs = np.unpackbits(packed.reshape(n_states, width), axis=1, count=n_channels, bitorder="little")
    else:
        outputs = np.zeros((n_states, 0), dtype=np.uint8)

    channels = []
    for _ in range(n_channels):
        rule, kind, stage = reader.unpack(_CHANNEL, "channel directory")
        if kind >= len(CHANNEL_KINDS):
            raise MachineFormatError(f"unknown channel kind {kind}")
        channels.append(Channel(rule, CHANNEL_KINDS[kind], stage))
    if len(set(channels)) != len(channels):
        raise MachineFormatError("duplicate channel in directory")

    n_rules, window, n_units = reader.unpack(_TRAILER, "rule header")
    if window >= len(WINDOW_MODES):
        raise MachineFormatError(f"unknown window mode {window}")
    units = []
    for _ in range(n_units):
        rule, stage, mode, p0, p1, p2, word_len = reader.unpack(_UNIT, "unit table")
        if mode >= len(UNIT_MODES):
            raise MachineFormatError(f"unknown unit mode {mode}")
        if rule >= n_rules:
            raise MachineFormatError(f"unit refers to rule {rule} of {n_rules}")
        units.append(CounterUnit(rule, stage, UNIT_MODES[mode], (p0, p1, p2), word_len))
    if reader.at != len(reader.data):
        raise MachineFormatError(f"{len(reader.data) - reader.at} trailing bytes")

    block1 = _annotated(table.astype(np.int32), int(start), outputs.astype(bool), channels)
    try:
        return CounterMachine(block1, tuple(units), n_rules, WINDOW_MODES[window])
    except (KeyError, IndexError, ValueError) as exc:
        raise MachineFormatError(f"inconsistent machine: {exc}") from exc


def save_machine(machine: CounterMachine, path) -> None:
    Path(path).write_bytes(dump_machine(machine))


def read_machine(path) -> CounterMachine:
    return load_machine(Path(path).read_bytes())
