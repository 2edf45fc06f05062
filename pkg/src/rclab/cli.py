"""Command line entry points: validate, simulate, check, equivalence, reduce.

Reports are JSON with sorted keys so two runs of the same command differ
only in the wallclock field.  Exit codes: 0 every check passed, 1 a check
failed, 2 the document or the flags were invalid, 3 the integration blew
up, 4 the requested checks do not apply to the system, 5 the system could
not be reduced at the requested momentum.
"""

import argparse
import json
import os
import sys
import time
from typing import List, Optional

from . import sysdef
from .sysdef import DefinitionError, ReductionError, Report, SuiteInapplicable

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_BLOWUP = 3
EXIT_INAPPLICABLE = 4
EXIT_IRREDUCIBLE = 5


def _resolve_seed(flag: Optional[int]) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("RCLAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise DefinitionError(f"RCLAB_SEED must be an integer, got {env!r}")


def _parse_floats(text: str, what: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise DefinitionError(f"{what} must be comma-separated numbers, got {text!r}")
    if not values:
        raise DefinitionError(f"{what} must contain at least one number")
    return values


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report(command: str, rows, seed: int, samples: int, tol, started: float,
            **extra) -> Report:
    return Report(command=command, seed=seed, samples=samples, tol=tol,
                  checks=tuple(rows), wallclock=time.perf_counter() - started,
                  extra=extra)


def cmd_validate(args) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed)
    loaded = sysdef.load_system(args.system)
    rows = sysdef.run_validate(loaded, samples=args.samples, seed=seed)
    report = _report(f"validate {args.system}", rows, seed, args.samples, None,
                     started, system=loaded.name)
    _emit(report.to_json(), args.out)
    return EXIT_PASS if report.ok else EXIT_VALIDATION


def cmd_check(args) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed)
    loaded = sysdef.load_system(args.system)
    mu = None if args.mu is None else _parse_floats(args.mu, "--mu")
    rows = sysdef.run_suite(loaded, args.suite, mu=mu, samples=args.samples, seed=seed)
    command = f"check {args.system} --suite {args.suite}"
    if args.mu is not None:
        command += f" --mu {args.mu}"
    report = _report(command, rows, seed, args.samples, None, started,
                     system=loaded.name, suite=args.suite, mu=mu)
    _emit(report.to_json(), args.out)
    return EXIT_PASS if report.ok else EXIT_CHECK_FAILED


def cmd_simulate(args) -> int:
    loaded = sysdef.load_system(args.system)
    state = _parse_floats(args.state, "--state")
    result = sysdef.simulate(loaded, state, args.t1, args.dt)
    _emit(result.to_csv(), args.out)
    if result.blown_up:
        print(f"integration aborted: {result.reason}", file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_PASS


def cmd_equivalence(args) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed)
    pair = sysdef.load_pair(args.pair)
    rows, extra = sysdef.run_equivalence(pair, args.kind, samples=args.samples,
                                         seed=seed, tol=args.tol)
    report = _report(f"equivalence {args.pair} --kind {args.kind}", rows, seed,
                     args.samples, args.tol, started, pair=pair.name, **extra)
    _emit(report.to_json(), args.out)
    return EXIT_PASS if report.ok else EXIT_CHECK_FAILED


def cmd_reduce(args) -> int:
    seed = _resolve_seed(args.seed)
    loaded = sysdef.load_system(args.system)
    mu = _parse_floats(args.mu, "--mu")
    offsets = None if args.offsets is None else _parse_floats(args.offsets, "--offsets")
    doc, notes = sysdef.reduce_emit(loaded, mu, offsets=offsets,
                                    samples=args.samples, seed=seed)
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    for note in notes:
        print(note, file=sys.stderr)
    return EXIT_PASS


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rclab",
        description="Load, simulate, check, compare, and reduce declared "
                    "Lagrangian control systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--samples", type=int, default=100,
                        help="sample count for the randomized checks")
        sp.add_argument("--seed", type=int, default=None,
                        help="sampling seed (default: RCLAB_SEED or 0)")
        sp.add_argument("--out", help="write the output here instead of stdout")

    sp = sub.add_parser("validate", help="schema, parse, and certification checks")
    sp.add_argument("system", help="path, built-in name, or JSON document")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("simulate", help="integrate the dynamics to CSV")
    sp.add_argument("system")
    sp.add_argument("--state", required=True,
                    help="initial coordinates then velocities, comma separated")
    sp.add_argument("--t1", type=float, default=10.0, help="end time")
    sp.add_argument("--dt", type=float, default=1e-3, help="integrator step")
    sp.add_argument("--out", help="write the CSV here instead of stdout")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("check", help="run an identity suite")
    sp.add_argument("system")
    sp.add_argument("--suite", choices=sysdef.SUITES, default="all")
    sp.add_argument("--mu", help="momentum value for the reduction suite")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("equivalence", help="match two systems through a chart map")
    sp.add_argument("pair", help="path or built-in name of a pair document")
    sp.add_argument("--kind", choices=sysdef.EQUIVALENCE_KINDS, required=True)
    sp.add_argument("--tol", type=float, default=sysdef.DEFAULT_EQUIV_TOL_VALUE)
    common(sp)
    sp.set_defaults(func=cmd_equivalence)

    sp = sub.add_parser("reduce", help="emit the reduced system document")
    sp.add_argument("system")
    sp.add_argument("--mu", required=True, help="momentum value, comma separated")
    sp.add_argument("--offsets", help="section offsets for the cyclic coordinates")
    common(sp)
    sp.set_defaults(func=cmd_reduce)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        return args.func(args)
    except DefinitionError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except SuiteInapplicable as err:
        print(f"inapplicable: {err}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except ReductionError as err:
        print(f"irreducible: {err}", file=sys.stderr)
        return EXIT_IRREDUCIBLE


if __name__ == "__main__":
    sys.exit(main())
