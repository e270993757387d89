"""Why a counter machine instead of one big DFA.

Two things are shown.  First, the machine does not extend a rule's language
when its words overlap: ``.*ab.*ba.*`` must reject "aba" because the two
words would share the middle byte.  Second, the minimal DFA for the union
of n such rules grows exponentially with n, while the counter machine's
detector grows by a fixed number of states per rule.

Run from the repository root:  python3 demos/overlap_and_blowup.py
"""

from __future__ import annotations

from recounter import blowup_curve, compile_machine, pair_family, scan
from recounter.oracle import oracle_vector
from recounter.rules import make_ruleset


def overlap() -> None:
    ruleset = make_ruleset([".*ab.*ba.*"])
    machine = compile_machine(ruleset)
    for word in (b"aba", b"abba", b"ababa"):
        _, out = scan(machine, word)
        print(f"  {word.decode():6s} machine {out.bits[0]}  oracle {oracle_vector(ruleset, word)[0]}")


def blowup() -> None:
    curve = blowup_curve(pair_family, range(1, 5))
    print("  n  classical DFA states  block-1 states  counter bits")
    for row in curve.rows:
        print(f"  {row.n}  {row.classical_states:20d}  {row.block1_states:14d}  {row.counter_bits:12d}")
    ratios = ", ".join(f"{r:.2f}" for r in curve.classical_ratios())
    print(f"  classical growth per extra rule: {ratios}")
    print(f"  block-1 growth per extra rule:   {curve.block1_increments()}")


if __name__ == "__main__":
    print("overlapping words are not allowed to share bytes:")
    overlap()
    print()
    print("the pair family .*ab.*cd.*, .*ef.*gh.*, ...:")
    blowup()
