"""Command line interface: ``morsecx run`` and ``morsecx verify``.

Exit codes: 0 success, 1 usage or parse error (or a failed verification
check), 2 boundary operator not square zero, 3 non-transverse
intersection, 4 other numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from . import report as rp
from . import specfile
from .errors import BoundaryNotSquareZero, MorseError, NonTransverse, SpecError

EXIT_OK, EXIT_USAGE, EXIT_SQUARE, EXIT_TRANSVERSE, EXIT_NUMERIC = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _uint(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _posint(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="morsecx", description="Morse complexes of gradient-like flows.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, hlp in (("run", "run the pipeline and write a JSON report"),
                      ("verify", "run the invariant checks applicable to a spec")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("spec", help="spec file (TOML) or a built-in such as 'costra(3, 2)'")
        s.add_argument("--out", type=Path, help="write the JSON report here")
        s.add_argument("--tol-scale", type=_positive_float, default=None,
                       help="multiply every tolerance by this factor")
        s.add_argument("--seed", type=_uint, default=None, help="seed of the sweep RNG")
        s.add_argument("--threads", type=_posint, default=None, help="parallel orbit searches")
        s.add_argument("--timing", action="store_true",
                       help="add wall-clock timings (output is then not reproducible)")
        if name == "run":
            s.add_argument("--verify-only", action="store_true",
                           help="print the check summary instead of the report")
    return p


def _load(arg: str) -> specfile.ProblemSpec:
    path = Path(arg)
    if path.exists():
        return specfile.load(path)
    if path.suffix == ".toml":
        raise SpecError(f"cannot read {arg}: no such file")
    return specfile.loads(f"builtin = {arg!r}", arg)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _load(args.spec)
    except SpecError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    run = spec.run
    seed = args.seed if args.seed is not None else run.get("seed", 0)
    tol_scale = args.tol_scale if args.tol_scale is not None else float(run.get("tol_scale", 1.0))
    threads = args.threads if args.threads is not None else run.get("threads", 1)
    verify = args.command == "verify" or getattr(args, "verify_only", False)
    try:
        rep = rp.build_report(spec, seed, tol_scale, threads, timing=args.timing)
    except BoundaryNotSquareZero as e:
        print(f"FAIL boundary_square_zero: {e}", file=sys.stderr)
        return EXIT_SQUARE
    except NonTransverse as e:
        print(f"FAIL transversality: {e}", file=sys.stderr)
        return EXIT_TRANSVERSE
    except SpecError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except MorseError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    for entry in rep["results"].get("non_hyperbolic", []):
        print(f"warning: NonHyperbolicRestPoint: {entry['reason']}", file=sys.stderr)
    text = rp.dumps(rep)
    if args.out is not None:
        args.out.write_text(text)
    if verify:
        for line in rp.summary_lines(rep):
            print(line)
        print(f"verify: {'PASS' if rep['ok'] else 'FAIL'}")
        return EXIT_OK if rep["ok"] else EXIT_USAGE
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
