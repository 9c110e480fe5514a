"""Command-line entry point.

Exit codes: 0 match, 1 mismatch, 2 usage error, 3 engine error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import evaluator
from .report import (
    AUGMENTED_ROWS,
    AXES,
    BENEFITS,
    FORMATS,
    TABLE_ROWS,
    coarse_t,
    compare,
    expected_matrix,
    render,
)
from .schemes import REGISTRY, get_driver
from .world import Scenario

EXIT_MATCH, EXIT_MISMATCH, EXIT_USAGE, EXIT_ENGINE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _feature(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _seed_default() -> int:
    raw = os.environ.get("SSOEVAL_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SSOEVAL_SEED must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ssoeval", description="Evaluate SSO schemes against the benefit matrix.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, benefit=False):
        sp.add_argument("--scheme", action="append", default=[], help="scheme name (repeatable or comma-separated)")
        if benefit:
            sp.add_argument("--benefit", action="append", default=[], help="benefit id (repeatable or comma-separated)")
        sp.add_argument("--seed", type=int, default=None, help="world seed (default: $SSOEVAL_SEED or 0)")
        sp.add_argument("--feature", action="append", type=_feature, default=[], metavar="KEY=VALUE",
                        help="override a driver feature flag")

    ra = sub.add_parser("run-all", help="evaluate schemes and diff against the expected matrix")
    common(ra)
    ra.add_argument("--format", choices=FORMATS, default="markdown")
    ra.add_argument("--augmented", action="store_true", help="include the two augmented schemes")

    ev = sub.add_parser("eval", help="evaluate single cells with trace and witness")
    common(ev, benefit=True)
    ev.add_argument("--trace", choices=("none", "recipe"), default="recipe", help="trace verbosity")

    cl = sub.add_parser("classify", help="infer taxonomy coordinates from traces")
    common(cl)
    cl.add_argument("--verbose", "-v", action="store_true", help="print per-axis evidence")

    tr = sub.add_parser("trace", help="dump the honest-run trace of a scheme or scenario document")
    common(tr)
    tr.add_argument("--scenario", help="scenario JSON document")
    tr.add_argument("--state", action="store_true", help="also dump principal stores")
    return p


def _split(values: list[str]) -> list[str]:
    return [v for item in values for v in item.split(",") if v]


def _schemes(args, default) -> list[str]:
    names = _split(args.scheme) or list(default)
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise UsageError(f"unknown scheme(s): {', '.join(unknown)}; known: {', '.join(REGISTRY)}")
    return names


def _benefits(args) -> list[str]:
    names = _split(args.benefit) or list(BENEFITS)
    unknown = [b for b in names if b not in BENEFITS]
    if unknown:
        raise UsageError(f"unknown benefit(s): {', '.join(unknown)}; known: {', '.join(BENEFITS)}")
    return names


def _features(args, schemes) -> dict:
    feats = dict(args.feature)
    for name in schemes:
        unknown = set(feats) - set(REGISTRY[name].defaults)
        if unknown:
            raise UsageError(f"{name}: unknown feature(s) {', '.join(sorted(unknown))}")
    return feats


def cmd_run_all(args, out, err) -> int:
    default = list(TABLE_ROWS) + (list(AUGMENTED_ROWS) if args.augmented else [])
    schemes = _schemes(args, default)
    feats = _features(args, schemes)
    computed, evidence = evaluator.evaluate_matrix(schemes, seed=args.seed, features=feats)
    expected = expected_matrix(augmented=True)
    graded = [s for s in schemes if s in expected.rows]
    for s in schemes:
        if s not in expected.rows:
            err.write(f"note: {s} has no expected row; shown but not compared\n")
    diff = compare(computed.only(graded), expected.only(graded), evidence)
    out.write(render(computed, args.format))
    # keep csv/json stdout machine-readable
    (out if args.format == "markdown" else err).write(diff.render())
    return EXIT_MISMATCH if diff else EXIT_MATCH


def cmd_eval(args, out, err) -> int:
    schemes = _schemes(args, [])
    benefits = _benefits(args)
    if not schemes:
        raise UsageError("eval needs --scheme")
    feats = _features(args, schemes)
    expected = expected_matrix(augmented=True)
    status = EXIT_MATCH
    for name in schemes:
        driver = get_driver(name, **feats)
        for b in benefits:
            try:
                ev = evaluator.evaluate(driver, b, seed=args.seed)
            except Exception as exc:
                raise evaluator.CellError(name, b, exc) from exc
            if args.trace == "none":
                ev.trace = []
            out.write(f"[{name}] ")
            out.write(ev.render())
            if name in expected.rows and expected.cell(name, b) != ev.cell:
                out.write(f"  expected: {expected.cell(name, b)}\n")
                status = EXIT_MISMATCH
    return status


def cmd_classify(args, out, err) -> int:
    schemes = _schemes(args, TABLE_ROWS)
    feats = _features(args, schemes)
    status = EXIT_MATCH
    out.write("scheme " + " ".join(AXES) + " | declared\n")
    for name in schemes:
        driver = get_driver(name, **feats)
        declared = driver.descriptor.coords()
        try:
            res = evaluator.classify(driver, seed=args.seed)
        except evaluator.ClassificationAmbiguous as exc:
            out.write(f"{name} ambiguous: {exc}\n")
            status = EXIT_MISMATCH
            continue
        got = [coarse_t(res.coords[a]) if a == "T" else res.coords[a] for a in AXES]
        want = [coarse_t(declared[a]) if a == "T" else declared[a] for a in AXES]
        mark = "" if got == want else "  MISMATCH"
        out.write(f"{name} {' '.join(got)} | {' '.join(want)}{mark}\n")
        if mark:
            status = EXIT_MISMATCH
        if args.verbose:
            for a in AXES:
                out.write(f"  {a}={res.coords[a]}: {res.evidence[a]}\n")
    return status


def cmd_trace(args, out, err) -> int:
    if args.scenario:
        try:
            scenario = Scenario.load(args.scenario)
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"bad scenario document: {exc}") from None
        if args.seed is not None and args.seed != scenario.seed:
            scenario.seed = args.seed
        schemes = _schemes(argparse.Namespace(scheme=[scenario.scheme]), [])
        feats = {**scenario.features, **_features(args, schemes)}
    else:
        schemes = _schemes(args, [])
        if len(schemes) != 1:
            raise UsageError("trace needs exactly one --scheme or a --scenario")
        feats = _features(args, schemes)
        scenario = Scenario(schemes[0], seed=args.seed)
    driver = get_driver(schemes[0], **feats)
    world, outcomes = evaluator.run_scenario(driver, scenario)
    out.write(world.dump_trace())
    for line in outcomes:
        out.write(f"# {line}\n")
    if args.state:
        out.write(world.dump_state())
    return EXIT_MATCH


COMMANDS = {"run-all": cmd_run_all, "eval": cmd_eval, "classify": cmd_classify, "trace": cmd_trace}


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_MATCH if exc.code == 0 else EXIT_USAGE
    try:
        if args.seed is None:
            args.seed = _seed_default()
        return COMMANDS[args.command](args, out, err)
    except UsageError as exc:
        err.write(f"ssoeval: error: {exc}\n")
        return EXIT_USAGE
    except evaluator.CellError as exc:
        err.write(f"ssoeval: engine error at {exc}\n")
        return EXIT_ENGINE
    except Exception as exc:  # anything else is an engine fault too
        err.write(f"ssoeval: engine error: {type(exc).__name__}: {exc}\n")
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
