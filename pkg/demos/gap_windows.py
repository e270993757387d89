"""Bounded gaps: the default single-counter window, and an exact variant.

A rule like ``.*ab[^c]{1,3}ca.*`` needs "ca" to start 1 to 3 bytes after
"ab", with no "c" in between.  The default ("paper") mode uses one counter per rule
that starts at the first "ab" and expires m' bytes later.  A second "ab"
that turns up while the counter is still running is ignored, so some
inputs are missed.  It never reports a false match.  The exact mode
keeps a bit per possible window start and finds everything.

Run from the repository root:  python3 demos/gap_windows.py
"""

from __future__ import annotations

from recounter import compile_machine, scan
from recounter.rules import make_ruleset
from recounter.verify import differential_check

RULE = ".*ab[^c]{1,3}ca.*"


def main() -> None:
    ruleset = make_ruleset([RULE])
    paper = compile_machine(ruleset, "paper")
    exact = compile_machine(ruleset, "exact")

    word = b"abaabaca"
    #         ^^       first "ab": its window is too short to reach "ca"
    #            ^^    second "ab", one byte later "ca": a match
    print(f"{RULE} on {word.decode()!r}")
    print(f"  paper mode: {scan(paper, word)[1].bits[0]}")
    print(f"  exact mode: {scan(exact, word)[1].bits[0]}")
    print()

    for name, machine in (("paper", paper), ("exact", exact)):
        report = differential_check(ruleset, machine, b"abc", max_len=10, n_random=0)
        print(f"{name} mode over all {report.words_checked} words up to length 10:")
        for line in report.lines()[1:5]:
            print("  " + line)


if __name__ == "__main__":
    main()
