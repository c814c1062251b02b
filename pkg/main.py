"""
Command-line front end.

    python main.py parse "y' = y^3 + x"
    python main.py construct AIL8 --set s1=0,s0=1,r1=1,r0=0
    python main.py fit --all
    python main.py numeric-check "y' = -1/(y+x)" --psi "(x+y-1)*exp(y)" --from 1,1 --to 2

Exit codes: 0 ok, 1 verification mismatch, 2 parse/usage error, 3 numeric failure.
"""

import argparse
import json
import logging
import random
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

import config
from catalog import entry_first_integral, verify_all, verify_fit
from expr_core import (
    NormalizationError,
    NumericError,
    ParseError,
    VerificationError,
    is_zero,
    parse_expression,
    to_text,
)
from numeric import NumericConfig, constancy_check, export_csv
from ode_model import (
    Family,
    FamilyParams,
    RationalODE,
    as_ode,
    construct_family,
    equation_to_json,
    is_constant_invariant,
    parse,
    parse_family,
    random_params,
    shape_classify,
)
from reduction import ail_branch, ail_reduce, ail_split, reduce_by_roots
from solver import check_first_integral, solve_ail
from transform import apply, invert_xy, transform_from_json

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class CommandResult:
    code: int
    payload: object
    as_json: bool = False

    def render(self, as_json: bool) -> str:
        if as_json:
            return json.dumps(self.payload, indent=2, ensure_ascii=False)
        if isinstance(self.payload, str):
            return self.payload
        if isinstance(self.payload, dict) and "text" in self.payload:
            return self.payload["text"]
        return json.dumps(self.payload, indent=2, ensure_ascii=False)


# =========================
# 1) ARGUMENT HELPERS
# =========================
def _split_top_level(text: str) -> List[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, current = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    parts.append("".join(current))
    return [p.strip() for p in parts if p.strip()]


def parse_assignments(text: Optional[str]) -> Dict[str, str]:
    values = {}
    for item in _split_top_level(text or ""):
        if "=" not in item:
            raise ValueError(f"--set expects name=value pairs, got {item!r}")
        name, value = item.split("=", 1)
        values[name.strip()] = value.strip()
    return values


def _floats(text: str, count: int, flag: str) -> Tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"{flag} expects {count} comma-separated numbers, got {text!r}")
    if len(values) != count:
        raise ValueError(f"{flag} expects {count} comma-separated numbers, got {text!r}")
    return values


def read_ode(text: str) -> RationalODE:
    """Accepts "y' = ..." or a bare right-hand side."""
    parsed = parse(text)
    return as_ode(parsed)


def _equation_payload(e, params: Optional[FamilyParams] = None) -> dict:
    data = equation_to_json(e, params)
    data["text"] = as_ode(e).text()
    return data


# =========================
# 2) SUBCOMMANDS
# =========================
def cmd_parse(args) -> CommandResult:
    parsed = parse(args.expr)
    if isinstance(parsed, RationalODE) or hasattr(parsed, "to_ode"):
        return CommandResult(EXIT_OK, _equation_payload(parsed))
    return CommandResult(EXIT_OK, {"expr": to_text(parsed), "text": to_text(parsed)})


def cmd_form(args) -> CommandResult:
    e = read_ode(args.ode)
    report = shape_classify(e)
    data = report.to_json()
    lines = [f"primary: {report.primary}", f"tags: {', '.join(report.tags) or '-'}"]
    lines += [f"  {k} = {v}" for k, v in data["slots"].items()]
    if "abel-first-kind" in report.tags or "abel-second-kind" in report.tags:
        data["constant_invariant"] = is_constant_invariant(e)
        lines.append(f"constant invariant: {data['constant_invariant']}")
    data["text"] = "\n".join(lines)
    return CommandResult(EXIT_OK, data)


def cmd_construct(args) -> CommandResult:
    p = FamilyParams(parse_family(args.family), parse_assignments(args.set))
    return CommandResult(EXIT_OK, _equation_payload(construct_family(p), p))


def cmd_transform(args) -> CommandResult:
    spec = args.spec
    if not spec.lstrip().startswith(("{", "[")):
        with open(spec, "r", encoding="utf-8") as fh:
            spec = fh.read()
    T = transform_from_json(spec)
    image = apply(T, read_ode(args.ode))
    data = _equation_payload(image)
    data["transform"] = T.to_json()
    return CommandResult(EXIT_OK, data)


def cmd_invert(args) -> CommandResult:
    return CommandResult(EXIT_OK, _equation_payload(invert_xy(read_ode(args.ode))))


def cmd_reduce(args) -> CommandResult:
    roots = [parse_expression(r) for r in _split_top_level(args.roots)] if args.roots else None
    reduced, chain = reduce_by_roots(read_ode(args.ode), roots)
    data = _equation_payload(reduced)
    data["chain"] = chain.to_json()
    data["text"] = f"{reduced.text()}\nvia {chain.describe()}"
    return CommandResult(EXIT_OK, data)


def cmd_split(args) -> CommandResult:
    family = parse_family(args.family)
    values = parse_assignments(args.set)
    if family == Family.AIL8:
        p = FamilyParams(family, values)
        result = ail_reduce(p) if args.full else ail_split(p)
    elif family == Family.AIL4:
        result = ail_branch(FamilyParams(family, values))
    else:
        raise ValueError(f"split works on AIL8 or AIL4, got {family.value}")
    data = result.to_json()
    text = [f"normal form: {result.normal_form}"]
    if result.k is not None:
        text.append("k = (" + ", ".join(to_text(v) for v in result.k) + ")")
    if result.equation is not None:
        text.append(result.equation.text())
    data["text"] = "\n".join(text)
    return CommandResult(EXIT_OK, data)


def cmd_solve_ail(args) -> CommandResult:
    p = FamilyParams(Family.AIL8, parse_assignments(args.set))
    solution = solve_ail(p, method=args.method)
    data = solution.to_json()
    data["text"] = f"Psi = {solution.text()}  [{solution.method}, {solution.verdict}]"
    return CommandResult(EXIT_OK, data)


def cmd_verify(args) -> CommandResult:
    e = read_ode(args.ode)
    ok, how = check_first_integral(e, parse_expression(args.psi))
    data = {"equation": e.text(), "first_integral": args.psi, "verified": ok, "verdict": how,
            "text": f"{'✅ verified' if ok else '❌ not a first integral'} ({how})"}
    return CommandResult(EXIT_OK if ok else EXIT_MISMATCH, data)


def cmd_fit(args) -> CommandResult:
    if args.all:
        reports = verify_all(args.workers)
    elif args.id:
        reports = [verify_fit(args.id)]
    else:
        raise ValueError("fit needs a catalog id or --all")
    frame = pd.DataFrame([{"id": r.id, "column": r.column, "identity": r.identity} for r in reports])
    passed = int(frame["identity"].sum())
    data = {"entries": [r.to_json() for r in reports], "verified": passed, "total": len(reports)}
    if args.id and args.with_integral and reports[0].identity:
        data["first_integral"] = entry_first_integral(args.id).to_json()
    text = frame.to_string(index=False) + f"\n\n{passed}/{len(reports)} identities verified"
    if len(reports) == 1:
        text = "\n".join(reports[0].steps) + "\n" + text
    data["text"] = text
    return CommandResult(EXIT_OK if passed == len(reports) else EXIT_MISMATCH, data)


def cmd_numeric_check(args) -> CommandResult:
    e = read_ode(args.ode)
    x0, y0 = _floats(args.start, 2, "--from")
    (x1,) = _floats(args.to, 1, "--to")
    cfg = NumericConfig(rtol=args.rtol or config.RTOL)
    report = constancy_check(e, parse_expression(args.psi), x0, y0, x1, cfg)
    ok = report.passed(args.tol)
    if args.csv:
        export_csv(report.trajectory, args.csv, parse_expression(args.psi), cfg)
    data = report.to_json()
    data["passed"] = ok
    data["text"] = (f"{'✅' if ok else '❌'} max relative drift {report.max_drift:.3e} "
                    f"(tol {args.tol:g}, {report.trajectory.stats['steps']} steps)")
    return CommandResult(EXIT_OK if ok else EXIT_MISMATCH, data)


def _usable_ail8(p: FamilyParams) -> bool:
    cubic_zero = all(p[f"a{i}"] == 0 for i in range(4))
    omega_zero = is_zero(p["r1"] * p["s0"] - p["r0"] * p["s1"])
    return not cubic_zero and not omega_zero


def cmd_solve_random(args) -> CommandResult:
    rng = random.Random(args.seed)
    rows = []
    while len(rows) < args.count:
        p = random_params(Family.AIL8, rng)
        if not _usable_ail8(p):
            continue
        try:
            solution = solve_ail(p)
            rows.append({"params": p.to_json()["params"], "verified": True, "method": solution.method})
        except VerificationError as err:
            logger.error("solve-random: %s", err)
            rows.append({"params": p.to_json()["params"], "verified": False, "method": "-"})
    passed = sum(r["verified"] for r in rows)
    data = {"seed": args.seed, "count": args.count, "verified": passed, "runs": rows,
            "text": f"{passed}/{args.count} random AIL8 first integrals verified (seed {args.seed})"}
    return CommandResult(EXIT_OK if passed == args.count else EXIT_MISMATCH, data)


# =========================
# 3) PARSER + DISPATCH
# =========================
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abel", description="Exact toolkit for Abel ODE classes")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="JSON payload instead of text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="parse an expression or ODE")
    p.add_argument("expr")
    p.set_defaults(handler=cmd_parse)

    p = sub.add_parser("form", parents=[common], help="shape report")
    p.add_argument("ode")
    p.set_defaults(handler=cmd_form)

    p = sub.add_parser("construct", parents=[common], help="build a family member")
    p.add_argument("family")
    p.add_argument("--set", default="")
    p.set_defaults(handler=cmd_construct)

    p = sub.add_parser("transform", parents=[common], help="apply a change of variables")
    p.add_argument("ode")
    p.add_argument("--spec", required=True, help="transform JSON or a path to it")
    p.set_defaults(handler=cmd_transform)

    p = sub.add_parser("invert", parents=[common], help="exchange x and y")
    p.add_argument("ode")
    p.set_defaults(handler=cmd_invert)

    p = sub.add_parser("reduce", parents=[common], help="root-based parameter reduction")
    p.add_argument("ode")
    p.add_argument("--roots", default=None, help="the three roots of the numerator cubic")
    p.set_defaults(handler=cmd_reduce)

    p = sub.add_parser("split", parents=[common], help="AIL8 -> AIL4 (-> AIL2/AIL1 with --full)")
    p.add_argument("--family", default="AIL8")
    p.add_argument("--set", default="")
    p.add_argument("--full", action="store_true")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("solve-ail", parents=[common], help="first integral of an AIL8 instance")
    p.add_argument("--set", default="")
    p.add_argument("--method", choices=["auto", "formal"], default="auto")
    p.set_defaults(handler=cmd_solve_ail)

    p = sub.add_parser("verify", parents=[common], help="check a first integral")
    p.add_argument("ode")
    p.add_argument("--psi", required=True)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("fit", parents=[common], help="replay catalog derivations")
    p.add_argument("id", nargs="?")
    p.add_argument("--all", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--with-integral", action="store_true")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("numeric-check", parents=[common], help="first-integral drift along an RK45 trajectory")
    p.add_argument("ode")
    p.add_argument("--psi", required=True)
    p.add_argument("--from", dest="start", required=True, help="x0,y0")
    p.add_argument("--to", required=True, help="x1")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--rtol", type=float, default=None)
    p.add_argument("--csv", default=None, help="write the trajectory as x,y,psi")
    p.set_defaults(handler=cmd_numeric_check)

    p = sub.add_parser("solve-random", parents=[common], help="seeded random AIL8 solver suite")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=config.SEED)
    p.set_defaults(handler=cmd_solve_random)
    return parser


def run(argv: Sequence[str]) -> CommandResult:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exit_:
        return CommandResult(EXIT_USAGE if exit_.code else EXIT_OK, {"error": "usage", "text": ""})
    try:
        result = args.handler(args)
    except VerificationError as err:
        result = CommandResult(EXIT_MISMATCH, {"error": "verification", "message": str(err)})
    except NumericError as err:
        result = CommandResult(EXIT_NUMERIC, {"error": "numeric", "message": str(err)})
    except ParseError as err:
        result = CommandResult(EXIT_USAGE, {"error": "parse", "message": str(err), "position": err.position})
    except NormalizationError as err:
        result = CommandResult(EXIT_USAGE, {"error": "normalization", "message": str(err)})
    except (ValueError, KeyError, OSError) as err:
        result = CommandResult(EXIT_USAGE, {"error": type(err).__name__, "message": str(err)})
    result.as_json = args.json
    if "message" in (result.payload if isinstance(result.payload, dict) else {}):
        result.payload.setdefault("text", f"❌ {result.payload['message']}")
    return result


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    result = run(argv)
    text = result.render(result.as_json)
    if text:
        print(text)
    return result.code


if __name__ == "__main__":
    sys.exit(main())
