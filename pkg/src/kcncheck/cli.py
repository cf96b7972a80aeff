"""Command line entry point.

Exit status: 0 pass, 1 fail, 2 definition or usage error, 3 internal
disagreement between characterizations that should coincide.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import catalog
from . import verdicts as v
from .definition import DefinitionError, load_definition

EXIT_OK, EXIT_FAIL, EXIT_DEFINITION, EXIT_DISAGREE = 0, 1, 2, 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kcncheck",
                                     description="Verify Kahler compatible Nijenhuis structures.")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="run a check suite on a definition file or builtin")
    src = check.add_mutually_exclusive_group(required=True)
    src.add_argument("path", nargs="?", help="chart definition file")
    src.add_argument("--builtin", metavar="NAME", help="use a builtin chart instead of a file")
    check.add_argument("--suite", choices=sorted(v.SUITES), default="all")
    check.add_argument("--samples", type=int, default=128)
    check.add_argument("--seed", type=int, default=42)
    check.add_argument("--tol", type=float, default=v.DEFAULT_TOL)
    check.add_argument("--format", choices=("text", "json"), default="text")

    sub.add_parser("list-builtins", help="print the builtin chart names")

    export = sub.add_parser("export-builtin", help="write a builtin as a definition file")
    export.add_argument("name")
    export.add_argument("output", nargs="?", help="output path (default: stdout)")
    return parser


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.3e}"


def render_text(result: dict) -> str:
    lines = [f"chart {result['chart']}  suite {result['suite']}  samples {result['samples']}"
             f"  seed {result['seed']}  tol {result['tolerance']:g}"]
    for entry in result["candidates"]:
        lines.append(f"candidate {entry['candidate']}")
        for rep in entry["checks"]:
            point = "-" if rep["worst_point"] is None else \
                "(" + ", ".join(f"{x:.4f}" for x in rep["worst_point"]) + ")"
            extra = rep["details"].get("class", "")
            lines.append(f"  {rep['check']:<22} {rep['verdict']:<15} "
                         f"{_fmt(rep['max_residual']):>10}  {point} {extra}".rstrip())
        if "kcn" in entry:
            lines.append(f"  K.c.N.: {entry['kcn']}")
            agr = entry["agreement"]
            state = "ok" if agr["ok"] else "DISAGREEMENT"
            if not agr["asserted"]:
                state += f" (not asserted: {agr.get('reason', '')})"
            lines.append(f"  agreement: {state}")
        lines.append(f"  gating: {entry['gating']}")
    for m in result.get("expectation_mismatches", []):
        lines.append(f"expectation mismatch: {m['candidate']} {m['check']} "
                     f"expected {m['expected']} got {m['observed']}")
    return "\n".join(lines) + "\n"


def render_json(result: dict) -> str:
    return json.dumps(result, indent=2, sort_keys=True) + "\n"


def exit_status(result: dict) -> int:
    if any(not e.get("agreement", {"ok": True})["ok"] for e in result["candidates"]):
        return EXIT_DISAGREE
    if "expectation_mismatches" in result:
        return EXIT_FAIL if result["expectation_mismatches"] else EXIT_OK
    if any(e["gating"] != v.PASS for e in result["candidates"]):
        return EXIT_FAIL
    return EXIT_OK


def _check(args, out) -> int:
    entry = None
    try:
        if args.builtin:
            entry = catalog.get_builtin(args.builtin)
            defn = entry.definition
        else:
            defn = load_definition(Path(args.path))
    except (DefinitionError, catalog.UnknownBuiltin, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEFINITION
    try:
        plan = v.SamplePlan(count=args.samples, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEFINITION
    chart = defn.chart()
    result = v.run_suite(chart, defn.structure_candidates(), plan, args.tol, args.suite)
    if entry is not None:
        result["expectation_mismatches"] = [
            {"candidate": e.candidate, "check": e.check, "expected": e.expected,
             "observed": got, "citation": e.citation}
            for e, got in catalog.expectation_mismatches(entry, result)]
    out.write(render_json(result) if args.format == "json" else render_text(result))
    return exit_status(result)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = _build_parser().parse_args(argv)
    if args.command == "list-builtins":
        out.write("".join(name + "\n" for name in catalog.list_builtins()))
        return EXIT_OK
    if args.command == "export-builtin":
        try:
            text = catalog.get_builtin(args.name).definition.serialize()
            if args.output:
                Path(args.output).write_text(text, encoding="utf-8")
            else:
                out.write(text)
        except (catalog.UnknownBuiltin, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DEFINITION
        return EXIT_OK
    return _check(args, out)


if __name__ == "__main__":
    sys.exit(main())
