"""Compile a small signature set and scan a stream that arrives in pieces.

Run from the repository root:  python3 demos/scan_a_stream.py
"""

from __future__ import annotations

from recounter import compile_machine, new_scan_state, parse_ruleset, scan, size_report

RULES = b"""\
# two ordered-word signatures and one with a bounded gap
.*GET.*passwd.*
.*user=.*admin.*token.*
.*x(y|z)[^;]{1,4};.*
"""

# The stream is cut at awkward places: a signature word is split across
# packets.  The scanner keeps one small state per stream, so this is fine.
PACKETS = [b"GET /etc/pas", b"swd HTTP/1.1\r\nuser=bob", b"&role=adm", b"in&xyab;&token=1"]


def main() -> None:
    ruleset = parse_ruleset(RULES)
    machine = compile_machine(ruleset)
    print(size_report(machine).summary())
    print()

    state = new_scan_state(machine)
    for packet in PACKETS:
        events, out = scan(machine, [packet], state)
        for e in events:
            print(f"  offset {e.byte_offset:3d}  rule {e.rule_id}  stage {e.stage}  {e.kind}")
        print(f"after {state.position:3d} bytes the outputs are {out.bits}")

    # Latches never drop: more bytes can only add matches.
    _, out = scan(machine, [b"nothing else matters"], state)
    print(f"after {state.position:3d} bytes the outputs are {out.bits}")


if __name__ == "__main__":
    main()
