"""Command-line entry point.

Exit codes: 0 success, 2 invalid spec or arguments, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import CCBoundsError, SpecError
from .experiments import BUILTINS, SCENARIOS, ExperimentSpec, builtin_spec, run_experiment, scenario_bounds

EXIT_SPEC = 2
EXIT_NUMERIC = 3


def _u64(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _assignment(s: str):
    key, sep, raw = s.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        raise argparse.ArgumentTypeError(f"value for {key!r} is not valid JSON") from None
    return key, value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help="base RNG seed (u64)")
    common.add_argument("--trials", type=_positive, default=None, help="Monte-Carlo trials per point")
    common.add_argument("--workers", type=_positive, default=None, help="parallel trial workers")
    common.add_argument("--out", default=None, help="CSV output path; a .json summary is written beside it")

    p = argparse.ArgumentParser(prog="ccbounds",
                                description="CCRB / LU-CCRB bounds and Monte-Carlo sweeps")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", parents=[common], help="bounds for a builtin scenario at one point")
    b.add_argument("scenario", choices=sorted(SCENARIOS))
    b.add_argument("--set", dest="params", type=_assignment, action="append", default=[],
                   metavar="KEY=VALUE", help="override a scenario parameter (JSON value)")

    f = sub.add_parser("figure", parents=[common], help="run a builtin figure sweep")
    f.add_argument("id", choices=sorted(BUILTINS))

    r = sub.add_parser("run", parents=[common], help="run a custom JSON spec")
    r.add_argument("spec", help="path to a spec JSON file")
    return p


def _overrides(args) -> dict:
    return {k: getattr(args, k) for k in ("seed", "trials", "workers", "out")
            if getattr(args, k) is not None}


def _report(rows, summary, out) -> None:
    if out is None:
        json.dump({"summary": summary, "rows": rows}, sys.stdout, indent=2, default=float)
    else:
        json.dump(summary, sys.stdout, indent=2)
    sys.stdout.write("\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bounds":
            res = scenario_bounds(args.scenario, **dict(args.params))
            text = json.dumps(res, indent=2)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text + "\n")
            print(text)
            return 0
        if args.command == "figure":
            spec = builtin_spec(args.id, **_overrides(args))
        else:
            try:
                with open(args.spec) as fh:
                    d = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise SpecError(f"cannot read spec: {exc}") from exc
            if isinstance(d, dict):
                d.update(_overrides(args))
            spec = ExperimentSpec.from_dict(d)
        rows, summary = run_experiment(spec)
        _report(rows, summary, spec.out)
        return 0
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (CCBoundsError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
