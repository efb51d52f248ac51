"""Command-line driver: spek check <file> [flags]."""

from __future__ import annotations

import argparse
import sys

from .attacker import AttackerSpec, generate_attacker
from .calculus import Call, process_str
from .errors import SpekError
from .frontend import build_config, parse_script, run


def _build_argparser():
    ap = argparse.ArgumentParser(
        prog="spek",
        description="Model checker for protocol processes against "
                    "spatial-epistemic properties.")
    sub = ap.add_subparsers(dest="command", required=True)
    chk = sub.add_parser("check", help="run the checks in a script file")
    chk.add_argument("file", help="script file")
    chk.add_argument("--attacker-depth", type=int, default=None,
                     help="maximum depth of generated attacker messages")
    chk.add_argument("--fresh-budget", type=int, default=None,
                     help="fresh names available per attacker output")
    chk.add_argument("--max-states", type=int, default=None,
                     help="state-space exploration cap")
    chk.add_argument("--max-depth", type=int, default=None,
                     help="exploration depth cap")
    chk.add_argument("--max-messages", type=int, default=None,
                     help="attacker message enumeration cap")
    chk.add_argument("--trace", action="store_true",
                     help="print witness traces under each verdict")
    chk.add_argument("--proof", action="store_true",
                     help="print knowledge-derivation certificates")
    chk.add_argument("--print-attacker", metavar="PROC", default=None,
                     help="print the generated attacker for PROC and exit")
    return ap


def main(argv=None) -> int:
    args = _build_argparser().parse_args(argv)
    try:
        with open(args.file, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    overrides = {
        "attacker_depth": args.attacker_depth,
        "fresh_budget": args.fresh_budget,
        "max_states": args.max_states,
        "max_depth": args.max_depth,
        "max_messages": args.max_messages,
    }
    try:
        script = parse_script(text)
        if args.print_attacker:
            cfg = build_config(script, overrides)
            att = generate_attacker(Call(args.print_attacker, ()),
                                    AttackerSpec(), script.theory,
                                    script.defs, cfg)
            print(process_str(att))
            return 0
        _results, report, code = run(script, overrides,
                                     trace=args.trace, proof=args.proof)
        sys.stdout.write(report)
        return code
    except SpekError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
