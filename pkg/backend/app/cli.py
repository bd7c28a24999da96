"""Command line entry point: ``python -m backend.app.cli <command> ...``.

Exit codes: 0 success (detected / same orbit / all fixtures pass), 1 the
negative answer, 2 an error, 3 for ``chamber`` when omega lies on a wall.
Results go to stdout, logs to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import BaseModel, ValidationError

from .catalog import FixtureReport
from .config import LOG_FORMAT, get_settings
from .engine import engine
from .errors import OnWallError, WallkitError
from .schemas import ChamberQuery, OrbitRequest, TableResponse, WallTestRequest

logger = logging.getLogger("wallkit.cli")

FORMATS = ("json", "csv", "table")
EXIT_OK, EXIT_NEGATIVE, EXIT_ERROR, EXIT_ON_WALL = 0, 1, 2, 3


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(payload: Any) -> str:
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    return json.dumps(payload, indent=2, sort_keys=True)


def _load_input(args: argparse.Namespace) -> Dict[str, Any]:
    if args.json is not None:
        text = args.json
    elif args.input is not None:
        text = Path(args.input).read_text(encoding="utf-8")
    else:
        raise WallkitError("this command needs --input FILE or --json STRING")
    data = json.loads(text)
    if not isinstance(data, dict):
        raise WallkitError("input must be a JSON object")
    return data


def _with_n(data: Dict[str, Any], args: argparse.Namespace) -> Dict[str, Any]:
    if args.n is not None:
        data = {**data, "n": args.n}
    return data


def _table_text(table: TableResponse, fmt: str) -> str:
    if fmt == "json":
        return _dump(table)
    out = io.StringIO()
    if table.caveat:
        out.write(f"# {table.caveat}\n")
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["r2", "D2", "div"])
        for row in table.rows:
            writer.writerow([row.ray_square, row.square, row.div])
        return out.getvalue()
    out.write(f"{'r^2':>8} {'D^2':>6} {'div':>4}\n")
    for row in table.rows:
        out.write(f"{row.ray_square:>8} {row.square:>6} {row.div:>4}\n")
    return out.getvalue()


def cmd_tabulate(args: argparse.Namespace) -> int:
    if args.n is None:
        raise WallkitError("tabulate needs --n")
    table = engine.tabulate(args.n, "confirmed" if args.confirmed else "candidate")
    _emit(_table_text(table, args.format))
    return EXIT_OK


def cmd_wall_test(args: argparse.Namespace) -> int:
    request = WallTestRequest.model_validate(_with_n(_load_input(args), args))
    response = engine.wall_test(request)
    if response.detected:
        _emit(_dump(response))
        return EXIT_OK
    _emit("not detected")
    return EXIT_NEGATIVE


def cmd_orbit(args: argparse.Namespace) -> int:
    request = OrbitRequest.model_validate(_with_n(_load_input(args), args))
    response = engine.orbit(request)
    _emit(_dump(response))
    return EXIT_OK if response.same_orbit else EXIT_NEGATIVE


def cmd_chamber(args: argparse.Namespace) -> int:
    data = _with_n(_load_input(args), args)
    if args.bound is not None:
        data.pop("search_bound", None)
        data["bound"] = args.bound
    query = ChamberQuery.model_validate(data)
    try:
        response = engine.chamber(query)
    except OnWallError as exc:
        wall = None if exc.wall is None else list(exc.wall.D.coords)
        _emit(_dump({"error": str(exc), "wall": wall}))
        return EXIT_ON_WALL
    _emit(_dump(response))
    return EXIT_OK


def junit_xml(reports: Sequence[FixtureReport]) -> str:
    failures = sum(len(r.failures) for r in reports)
    tests = sum(len(r.assertions) for r in reports)
    root = ET.Element("testsuites", name="wallkit-catalog", tests=str(tests), failures=str(failures))
    for report in reports:
        suite = ET.SubElement(
            root,
            "testsuite",
            name=report.name,
            tests=str(len(report.assertions)),
            failures=str(len(report.failures)),
        )
        for a in report.assertions:
            case = ET.SubElement(suite, "testcase", classname=report.name, name=f"{a.quantity}[n={a.n}]")
            if not a.passed:
                failure = ET.SubElement(case, "failure", message=f"expected {a.expected!r}, observed {a.observed!r}")
                failure.text = f"tag {a.tag}; {report.provenance.quote}"
    ET.indent(root)
    return ET.tostring(root, encoding="unicode")


def cmd_verify(args: argparse.Namespace) -> int:
    names = args.names or engine.catalog()
    reports: List[FixtureReport] = []
    for name in names:
        n = args.n
        if n is not None and n not in engine.catalog_n_values(name):
            logger.info("skipping %s: no claims at n=%d", name, n)
            continue
        reports.append(engine.verify(name, n))
    if args.format == "junit":
        _emit(junit_xml(reports))
    else:
        _emit(_dump([r.model_dump(mode="json") for r in reports]))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_NEGATIVE


def cmd_check_orbits(args: argparse.Namespace) -> int:
    n_values = args.n_values or [2, 3, 5]
    result = engine.check_orbits(seed=args.seed, samples=args.samples, n_values=n_values)
    _emit(_dump(result))
    return EXIT_OK if result.violations == 0 else EXIT_NEGATIVE


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=None, help="K3^[n] type (n >= 2)")
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")

    data = argparse.ArgumentParser(add_help=False)
    source = data.add_mutually_exclusive_group()
    source.add_argument("--input", metavar="FILE", help="read the request from a JSON file")
    source.add_argument("--json", metavar="STRING", help="inline JSON request")

    parser = argparse.ArgumentParser(
        prog="wallkit",
        description="Exact wall divisors and chambers for manifolds of K3^[n] type.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tabulate", parents=[common], help="list wall types (r^2, D^2, div)")
    p.add_argument("--format", choices=FORMATS, default="table")
    p.add_argument("--confirmed", action="store_true", help="keep only types with a detected witness")
    p.set_defaults(func=cmd_tabulate)

    p = sub.add_parser("wall-test", parents=[common, data], help="test a divisor or a (square, div) type")
    p.set_defaults(func=cmd_wall_test)

    p = sub.add_parser("orbit", parents=[common, data], help="compare Eichler invariants of v and w")
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("chamber", parents=[common, data], help="walls and extremal rays of a chamber")
    p.add_argument("--bound", type=_positive_int, default=None, help="search bound (default from settings)")
    p.set_defaults(func=cmd_chamber)

    p = sub.add_parser("verify", parents=[common], help="recompute the fixture catalog")
    p.add_argument("names", nargs="*", help="fixture names (default: all)")
    p.add_argument("--format", choices=("json", "junit"), default="json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("check-orbits", parents=[common], help="random Eichler transvection invariance check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=_positive_int, default=200)
    p.add_argument("--n-values", type=int, nargs="+", default=None)
    p.set_defaults(func=cmd_check_orbits)
    return parser


def _configure_logging(quiet: bool) -> None:
    level = "WARNING" if quiet else get_settings().log_level
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _configure_logging(args.quiet)
        return args.func(args)
    except (WallkitError, ValidationError, json.JSONDecodeError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
