"""Command-line interface: compile, scan, verify, bench, graph.

Exit codes: 0 ok, 1 a rule matched under ``--fail-on-match``, 2 usage or
input error, 3 state cap exceeded, 4 corrupt machine file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .analyzer import blowup_curve, export_dot, pair_family, size_report
from .automata import DEFAULT_STATE_CAP, StateCapExceeded
from .machine import WINDOW_MODES, ScanIOError, compile_machine, new_scan_state, scan
from .rules import MODES, RulesetError, parse_ruleset
from .serialize import MachineFormatError, read_machine, save_machine
from .verify import differential_check

EXIT_OK = 0
EXIT_MATCH = 1
EXIT_USAGE = 2
EXIT_CAP = 3
EXIT_CORRUPT = 4

CHUNK_SIZE = 1 << 16
STATE_CAP_ENV = "RECOUNTER_STATE_CAP"


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _state_cap(flag: int | None) -> int:
    if flag is not None:
        return flag
    raw = os.environ.get(STATE_CAP_ENV)
    if raw is None:
        return DEFAULT_STATE_CAP
    try:
        value = int(raw)
    except ValueError:
        raise _Failure(EXIT_USAGE, f"{STATE_CAP_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise _Failure(EXIT_USAGE, f"{STATE_CAP_ENV} must be positive")
    return value


def _read_rules(path: str, mode: str | None):
    try:
        text = Path(path).read_bytes()
    except OSError as exc:
        raise _Failure(EXIT_USAGE, f"cannot read ruleset {path}: {exc.strerror or exc}") from exc
    try:
        return parse_ruleset(text, mode)
    except RulesetError as exc:
        raise _Failure(EXIT_USAGE, f"{path}: {exc}") from exc


def _load(path: str):
    try:
        return read_machine(path)
    except MachineFormatError as exc:
        raise _Failure(EXIT_CORRUPT, f"{path}: corrupt machine file: {exc}") from exc
    except OSError as exc:
        raise _Failure(EXIT_USAGE, f"cannot read machine {path}: {exc.strerror or exc}") from exc


def _compile(ruleset, window: str, cap: int):
    try:
        return compile_machine(ruleset, window, cap)
    except StateCapExceeded as exc:
        raise _Failure(EXIT_CAP, str(exc)) from exc


def cmd_compile(args) -> int:
    ruleset = _read_rules(args.rules, args.mode)
    machine = _compile(ruleset, args.window, _state_cap(args.state_cap))
    try:
        save_machine(machine, args.out)
    except OSError as exc:
        raise _Failure(EXIT_USAGE, f"cannot write {args.out}: {exc.strerror or exc}") from exc
    print(f"compiled {ruleset.n} rules ({ruleset.mode}, {args.window} windows) to {args.out}")
    print(size_report(machine).summary())
    return EXIT_OK


def _scan_one(machine, source: str):
    state = new_scan_state(machine)
    if source == "-":
        events, out = scan(machine, sys.stdin.buffer, state, CHUNK_SIZE)
    else:
        with open(source, "rb") as handle:
            events, out = scan(machine, handle, state, CHUNK_SIZE)
    return events, out, state.position


def cmd_scan(args) -> int:
    machine = _load(args.machine)
    inputs = args.input or ["-"]
    for path in inputs:
        if path != "-" and not Path(path).is_file():
            raise _Failure(EXIT_USAGE, f"no such input file: {path}")

    def job(path):
        try:
            return _scan_one(machine, path)
        except ScanIOError as exc:
            raise _Failure(EXIT_USAGE, f"{path}: {exc}") from exc
        except OSError as exc:
            raise _Failure(EXIT_USAGE, f"cannot read {path}: {exc.strerror or exc}") from exc

    if args.jobs > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(job, inputs))
    else:
        results = [job(path) for path in inputs]

    matched = False
    for path, (events, out, consumed) in zip(inputs, results):
        matched = matched or out.any
        if args.quiet:
            continue
        for event in events:
            record = event.as_record()
            if len(inputs) > 1:
                record["input"] = path
            print(json.dumps(record, separators=(",", ":")))
        summary = {"summary": {"outputs": list(out.bits), "bytes": consumed}}
        if len(inputs) > 1:
            summary["summary"]["input"] = path
        print(json.dumps(summary, separators=(",", ":")))
    if args.fail_on_match and matched:
        return EXIT_MATCH
    return EXIT_OK


def cmd_verify(args) -> int:
    ruleset = _read_rules(args.rules, args.mode)
    cap = _state_cap(args.state_cap)
    machine = _compile(ruleset, args.window, cap)
    alphabet = args.alphabet.encode("latin-1")
    if not alphabet:
        raise _Failure(EXIT_USAGE, "alphabet must not be empty")
    try:
        report = differential_check(
            ruleset, machine, alphabet, args.max_len, args.random, args.seed,
            args.random_max_len, cap,
        )
    except ValueError as exc:
        raise _Failure(EXIT_USAGE, str(exc)) from exc
    for line in report.lines():
        print(line)
    print("verdict: " + ("PASS" if report.ok else "FAIL"))
    return EXIT_OK if report.ok else EXIT_MATCH


def cmd_bench(args) -> int:
    if args.curve is not None:
        if args.curve < 1:
            raise _Failure(EXIT_USAGE, "--curve needs a positive n")
        curve = blowup_curve(pair_family, range(1, args.curve + 1), _state_cap(args.state_cap))
        sys.stdout.write(curve.to_csv())
        if args.machine is None:
            return EXIT_OK
    if args.machine is None or args.input is None:
        raise _Failure(EXIT_USAGE, "bench needs -m and -i (or --curve)")
    machine = _load(args.machine)
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        raise _Failure(EXIT_USAGE, f"cannot read {args.input}: {exc.strerror or exc}") from exc
    state = new_scan_state(machine)
    before = state_footprint(state)
    started = time.perf_counter()
    scan(machine, data, state, CHUNK_SIZE)
    elapsed = max(time.perf_counter() - started, 1e-9)
    after = state_footprint(state)
    print(f"bytes: {len(data)}")
    print(f"seconds: {elapsed:.4f}")
    print(f"throughput: {len(data) / elapsed / 1e6:.3f} MB/s")
    print(f"scan state: {before} bytes before, {after} bytes after")
    return EXIT_OK


def cmd_graph(args) -> int:
    machine = _load(args.machine)
    try:
        Path(args.out).write_text(export_dot(machine), encoding="utf-8")
    except OSError as exc:
        raise _Failure(EXIT_USAGE, f"cannot write {args.out}: {exc.strerror or exc}") from exc
    return EXIT_OK


def state_footprint(state) -> int:
    """Bytes held by a scan state: the object, its lists and their integers."""
    total = sys.getsizeof(state)
    for value in vars(state).values():
        total += sys.getsizeof(value)
        if isinstance(value, (list, tuple)):
            total += sum(sys.getsizeof(v) for v in value)
    return total


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recounter", description="DFA-with-counters signature scanner")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a ruleset to a machine file")
    p.add_argument("-r", "--rules", required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--window", choices=WINDOW_MODES, default="paper")
    p.add_argument("--state-cap", type=int)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser(
        "scan",
        help="scan input with a compiled machine",
        description="Prints one JSON record per event, then a summary line per input. "
        "Exits 0 normally; with --fail-on-match exits 1 when any rule matched "
        "(combine with --quiet for a silent match test).",
    )
    p.add_argument("-m", "--machine", required=True)
    p.add_argument("-i", "--input", action="append", help="input file, '-' for stdin (repeatable)")
    p.add_argument("--quiet", action="store_true", help="print nothing")
    p.add_argument("--fail-on-match", action="store_true", help="exit 1 if any rule matched")
    p.add_argument("--jobs", type=int, default=1, help="scan several inputs concurrently")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("verify", help="differential check against the oracle and a classical DFA")
    p.add_argument("-r", "--rules", required=True)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--window", choices=WINDOW_MODES, default="paper")
    p.add_argument("--alphabet", default="abcd")
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--random", type=int, default=100_000)
    p.add_argument("--random-max-len", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--state-cap", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="throughput and state size; optional blow-up curve")
    p.add_argument("-m", "--machine")
    p.add_argument("-i", "--input")
    p.add_argument("--curve", type=int, metavar="N", help="emit the blow-up curve for n = 1..N as CSV")
    p.add_argument("--state-cap", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("graph", help="write a machine as Graphviz DOT")
    p.add_argument("-m", "--machine", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_graph)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except _Failure as exc:
        print(f"recounter: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
