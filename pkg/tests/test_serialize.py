from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recounter.machine import compile_machine, scan
from recounter.rules import DOUBLE_COUNTING, make_ruleset
from recounter.serialize import (
    MachineFormatError,
    dump_machine,
    load_machine,
    read_machine,
    save_machine,
)
from helpers import random_chain_ruleset, random_gap_pattern

MACHINES = [
    (([".*ab.*cd.*", ".*ef.*gh.*"], "plain"), "paper"),
    (([".*ab[^z]{1,3}cd.*", ".*a.*b.*c.*"], "plain"), "exact"),
    (([".*ab[^z]{1,3}cd.*"], "plain"), "paper"),
    (([".*xa{2,3}b.*c.*", ".*a{2}b.*c.*"], DOUBLE_COUNTING), "paper"),
]


@pytest.mark.parametrize("spec, window", MACHINES)
def test_round_trip_is_bit_exact(spec, window, tmp_path):
    machine = compile_machine(make_ruleset(*spec), window)
    blob = dump_machine(machine)
    loaded = load_machine(blob)
    assert loaded == machine
    assert dump_machine(loaded) == blob
    save_machine(machine, tmp_path / "m.bin")
    assert (tmp_path / "m.bin").read_bytes() == blob
    assert read_machine(tmp_path / "m.bin") == machine
    assert scan(loaded, b"xaabcabzzcdefgh") == scan(machine, b"xaabcabzzcdefgh")


def test_header_layout():
    machine = compile_machine(make_ruleset([".*ab.*cd.*"]))
    blob = dump_machine(machine)
    magic, version, alphabet, states, start, channels = struct.unpack_from("<4sIIIII", blob)
    assert (magic, version, alphabet) == (b"RCTR", 1, 256)
    assert (states, start, channels) == (5, 0, 2)
    table = np.frombuffer(blob, dtype="<u4", count=states * 256, offset=24).reshape(states, 256)
    assert np.array_equal(table, machine.block1.table)


def _corrupt(blob: bytes, offset: int, value: bytes) -> bytes:
    return blob[:offset] + value + blob[offset + len(value):]


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda b: _corrupt(b, 0, b"XXXX"), "bad magic"),
        (lambda b: _corrupt(b, 4, struct.pack("<I", 9)), "version"),
        (lambda b: _corrupt(b, 8, struct.pack("<I", 128)), "alphabet"),
        (lambda b: _corrupt(b, 16, struct.pack("<I", 99)), "start state"),
        (lambda b: _corrupt(b, 24, struct.pack("<I", 77)), "out of range"),
        (lambda b: b[:-1], "truncated"),
        (lambda b: b + b"\0", "trailing"),
        (lambda b: b"", "truncated"),
    ],
)
def test_corrupt_files_are_rejected(mutate, message):
    blob = dump_machine(compile_machine(make_ruleset([".*ab.*cd.*"])))
    with pytest.raises(MachineFormatError, match=message):
        load_machine(mutate(blob))


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_random_machines_round_trip(seed):
    rng = np.random.default_rng(seed)
    ruleset = random_chain_ruleset(rng) if seed % 2 else make_ruleset([random_gap_pattern(rng)])
    machine = compile_machine(ruleset, "exact" if seed % 3 == 0 else "paper")
    blob = dump_machine(machine)
    assert dump_machine(load_machine(blob)) == blob


@settings(max_examples=200)
@given(st.binary(max_size=64))
def test_garbage_never_crashes(data):
    try:
        load_machine(b"RCTR" + data)
    except MachineFormatError:
        pass
