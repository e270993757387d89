"""Regex signature matching with a DFA-with-counters construction.

The pipeline is: parse a ruleset, decompose each rule into prefix, optional
gap and chain words, compile block 1 (a detector DFA) plus counting units and
latches, then scan byte streams in constant state per stream.
"""

from .analyzer import BlowupCurve, SizeReport, blowup_curve, export_dot, pair_family, size_report
from .automata import (
    AnnotatedDfa,
    Channel,
    Dfa,
    Nfa,
    StateCapExceeded,
    aho_corasick,
    build_block1,
    minimize,
    subset_construct,
    thompson_nfa,
)
from .machine import (
    CounterMachine,
    CounterUnit,
    MatchEvent,
    OutputVector,
    ScanIOError,
    ScanState,
    compile_machine,
    new_scan_state,
    reset,
    scan,
    step,
)
from .oracle import OracleVerdict, enumerate_words, oracle_match, oracle_match_gap
from .pattern import BlowupSign, PatternError, detect_blowup_signs, parse_pattern, unparse
from .rules import DecomposedRule, GapSpec, Ruleset, RulesetError, ShapeError, decompose_rule, parse_ruleset
from .serialize import MachineFormatError, dump_machine, load_machine

compile = compile_machine  # noqa: A001  (the operation is named compile in the interface)

__all__ = [
    "AnnotatedDfa", "BlowupCurve", "BlowupSign", "Channel", "CounterMachine", "CounterUnit",
    "DecomposedRule", "Dfa", "GapSpec", "MachineFormatError", "MatchEvent", "Nfa", "OracleVerdict",
    "OutputVector", "PatternError", "Ruleset", "RulesetError", "ScanIOError", "ScanState",
    "ShapeError", "SizeReport", "StateCapExceeded", "aho_corasick", "blowup_curve", "build_block1",
    "compile", "compile_machine", "decompose_rule", "detect_blowup_signs", "dump_machine",
    "enumerate_words", "export_dot", "load_machine", "minimize", "new_scan_state", "oracle_match",
    "oracle_match_gap", "pair_family", "parse_pattern", "parse_ruleset", "reset", "scan",
    "size_report", "step", "subset_construct", "thompson_nfa", "unparse",
]
