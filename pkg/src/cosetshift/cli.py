"""Command-line entry point: ``cosetshift <operation> SPEC [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import CosetShiftError
from .gallery import GALLERY
from .report import Flags, run


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--radius", type=int, default=3, help="truncation radius for generated graphs")
    common.add_argument("--nmax", type=int, default=8, help="longest word / path length checked")
    common.add_argument("--verify-depth", type=int, default=2, help="window depth for structure checks")
    common.add_argument("--section", help="section to operate on (default: first suitable one)")
    common.add_argument("--out", help="output file (directory for 'examples')")
    common.add_argument("--format", choices=("human", "machine"), default="human")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="cosetshift",
                                description="Decompose group shifts and classify countable-state graphs.")
    sub = p.add_subparsers(dest="operation", required=True)
    for op, text in (("validate", "build every section and run its checks"),
                     ("decompose", "reduce a group shift to full shifts times a permutation"),
                     ("classify", "split a generated graph into T, C and W parts"),
                     ("entropy", "path-count growth next to the invariant-measure bound"),
                     ("export-dot", "write the transition graph in DOT format")):
        sp = sub.add_parser(op, parents=[common], help=text)
        sp.add_argument("spec", help="spec file ('-' reads standard input)")
    ex = sub.add_parser("examples", parents=[common], help="list or write the bundled example specs")
    ex.add_argument("name", nargs="?", choices=sorted(GALLERY), help="print one example spec")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = Flags(args.radius, args.nmax, args.verify_depth, args.section, args.out)
    try:
        text = None
        if args.operation != "examples":
            text = sys.stdin.read() if args.spec == "-" else Path(args.spec).read_text(encoding="utf-8")
        rep = run(args.operation, text, flags, getattr(args, "name", None))
    except (CosetShiftError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rendered = rep.render(args.format)
    if args.operation in ("export-dot", "examples") or not args.out:
        sys.stdout.write(rendered)
    else:
        Path(args.out).write_text(rendered, encoding="utf-8")
    if rep.attachment is not None:
        sys.stdout.write(rep.attachment)
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
