"""Command-line entry point: ``ngtbochner verify | list-checks | synthesize-nullspace``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import checks as C
from .fixtures import BUILTINS, FixtureError, load_fixture, nullspace_fixture
from .report import to_json, to_markdown
from .runner import DEFAULT_SAMPLE, run_fixture

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(
        prog="ngtbochner",
        description="Verify identities of the f-connection calculus on periodic fixtures.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run checks on a fixture and emit a report")
    v.add_argument("--fixture", required=True, help="built-in name, builtin:<name>, a JSON file path, or 'all'")
    v.add_argument("--checks", default="all", help="comma-separated check ids, or 'all' (default)")
    v.add_argument("--resolution", type=int, help="grid points per axis (default depends on dim)")
    v.add_argument("--seed", type=int, help="override the fixture's probe seed")
    v.add_argument("--sample", type=int, default=DEFAULT_SAMPLE,
                   help=f"points used by pointwise checks; 0 means the full grid (default {DEFAULT_SAMPLE})")
    v.add_argument("--format", choices=("json", "markdown"), default="markdown")
    v.add_argument("--out", help="write the report here instead of stdout")
    v.add_argument("--no-timings", action="store_true", help="report wall_time as 0 for byte-identical reports")

    lc = sub.add_parser("list-checks", help="print the check registry with anchors")
    lc.add_argument("--format", choices=("text", "json"), default="text")

    s = sub.add_parser("synthesize-nullspace", help="solve the constant Einstein system and write a fixture file")
    s.add_argument("--dim", type=int, default=4)
    s.add_argument("--planes", type=float, nargs="+", default=[0.5, 0.75],
                   help="F coefficients on the coordinate planes (x1,x2), (x3,x4), ...")
    s.add_argument("--name", default="nullspace_synth")
    s.add_argument("--out", help="fixture path (default stdout)")
    return p


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w") as fh:
        fh.write(text)


def _error(msg):
    print(f"ngtbochner: error: {msg}", file=sys.stderr)
    return EXIT_INPUT


def _verify(args):
    if args.resolution is not None and args.resolution < 2:
        return _error("--resolution must be at least 2")
    if args.out is not None and not os.path.isdir(os.path.dirname(os.path.abspath(args.out))):
        return _error(f"cannot write report: directory of {args.out} does not exist")
    refs = list(BUILTINS) if args.fixture == "all" else [args.fixture]
    try:
        C.select(args.checks)
        specs = [load_fixture(r) for r in refs]
    except FixtureError as exc:
        return _error(str(exc))
    except KeyError as exc:
        return _error(f"unknown check id(s): {exc.args[0]}")
    runs = []
    for spec in specs:
        try:
            runs.append(
                run_fixture(spec, args.checks, resolution=args.resolution, seed=args.seed,
                            sample=args.sample, timings=not args.no_timings)
            )
        except (FixtureError, KeyError) as exc:
            return _error(f"{spec.name}: {exc}")
    text = to_json(runs) + "\n" if args.format == "json" else to_markdown(runs)
    try:
        _write(text, args.out)
    except OSError as exc:
        return _error(f"cannot write report: {exc}")
    return EXIT_FAIL if any(r.exit_status for r in runs) else EXIT_OK


def _list_checks(args):
    if args.format == "json":
        rows = [
            {"id": c.id, "anchor": c.anchor, "group": c.group, "kind": c.kind,
             "hypotheses": list(c.hypotheses), "tolerance": c.tol}
            for c in C.REGISTRY
        ]
        print(json.dumps(rows, indent=2, ensure_ascii=False))
        return EXIT_OK
    width = max(len(c.id) for c in C.REGISTRY)
    for c in C.REGISTRY:
        hyp = ", ".join(c.hypotheses) or "-"
        print(f"{c.id:<{width}}  [{c.group}/{c.kind}] {c.anchor}  (hypotheses: {hyp}; tol {c.tol:.0e})")
    return EXIT_OK


def _synthesize(args):
    try:
        data, info = nullspace_fixture(args.dim, tuple(args.planes), args.name)
    except FixtureError as exc:
        return _error(str(exc))
    try:
        _write(json.dumps(data, indent=2) + "\n", args.out)
    except OSError as exc:
        return _error(f"cannot write fixture: {exc}")
    print(
        f"nullspace dim {info['nullspace_dim']}, skew part dim {info['skew_intersection_dim']}",
        file=sys.stderr,
    )
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    handler = {"verify": _verify, "list-checks": _list_checks, "synthesize-nullspace": _synthesize}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
