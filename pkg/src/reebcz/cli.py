"""Command-line interface.

Exit codes: 0 ok / consistent, 1 usage or input error, 2 violation,
3 inconclusive, 4 numeric budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .arith import DEFAULT_BITS, AmbiguousFloor, Ordering, UndecidableComparison, as_expr, parse, to_text
from .audit import (
    AuditReport,
    Verdict,
    convexity_report,
    multiplicity_audit,
    perfectness_check,
    resonance_check,
    third_orbit_analysis,
)
from .cij import DEFAULT_SEARCH_BOUND, CIJInstance, SearchExhausted, find_common_jump, verify_solution
from .czpath import BlockSpec, CZPathError, HyperbolicBlock, conley_zehnder, iterate_block_path, parse_path_text
from .datasets import DatasetError, DatasetWarning, EllipsoidSpec, dumps_dataset, ellipsoid_system, load_dataset, split_radii
from .homology import format_report, generator_table, homology_of_certificate, morse_feasibility, Infeasible
from .index import PreconditionError, index_spectrum, iterate_record

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_INCONCLUSIVE, EXIT_BUDGET = 0, 1, 2, 3, 4
_VERDICT_EXIT = {Verdict.CONSISTENT: EXIT_OK, Verdict.VIOLATION: EXIT_VIOLATION, Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--bits", type=int, default=DEFAULT_BITS, help="precision budget for certified floors")
    p.add_argument("--cap", type=parse, default=None, help="action cap K (expression, e.g. '(* 5 (sqrt 2))')")
    p.add_argument("--search-bound", type=int, default=DEFAULT_SEARCH_BOUND, help="largest N scanned for a common jump")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--workers", type=int, default=1)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="reebcz", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", parents=[common], help="iterated indices of every orbit")
    p.add_argument("dataset", nargs="?", default="-")
    p.add_argument("--max-iterate", type=int, default=10)

    p = sub.add_parser("spectrum", parents=[common], help="all iterates up to the action cap, sorted by index")
    p.add_argument("dataset", nargs="?", default="-")

    p = sub.add_parser("cij", parents=[common], help="find and verify a common index jump")
    p.add_argument("dataset", nargs="?", default="-")
    p.add_argument("--M", type=int, default=1)

    p = sub.add_parser("homology", parents=[common], help="graded good generators and cancellation feasibility")
    p.add_argument("dataset", nargs="?", default="-")

    p = sub.add_parser("verify", parents=[common], help="dataset audits")
    p.add_argument("dataset", nargs="?", default="-")
    p.add_argument("--check", required=True, choices=["convexity", "multiplicity", "perfect", "resonance", "third-orbit"])
    p.add_argument("--threshold", choices=["n+1", "n-1"], default="n+1", help="index bound for the multiplicity audit")

    p = sub.add_parser("ellipsoid", parents=[common], help="dataset of an irrational ellipsoid")
    p.add_argument("--radii", required=True, help="comma separated expressions, e.g. '1,(sqrt 2)'")

    p = sub.add_parser("czpath", parents=[common], help="index of a sampled symplectic path or a block path")
    p.add_argument("path", nargs="?", help="text file, one sample per line: t m11 m12 ...")
    p.add_argument("--rotations", default="", help="rotation angles in turns, comma separated expressions")
    p.add_argument("--hyperbolic", default="", help="signed stretch factors, comma separated")
    p.add_argument("--iterate", type=int, default=1)
    p.add_argument("--samples", type=int, default=512)
    return parser


def _load(args):
    if args.dataset in (None, "-"):
        return load_dataset(sys.stdin)
    return load_dataset(args.dataset)


def _need_cap(args):
    if args.cap is None:
        raise UsageError(f"{args.command}: --cap is required")
    return args.cap


def _emit(args, data, text: str):
    if args.json:
        print(json.dumps(data, indent=2))
    else:
        print(text)


def _cmd_index(args) -> int:
    system = _load(args)
    rows = []
    for o in system:
        for ell in range(1, args.max_iterate + 1):
            r = iterate_record(o, ell, args.bits)
            rows.append({"label": r.label, "iterate": ell, "index": r.index, "good": r.good, "action": to_text(r.action)})
    lines = [f"{'orbit':>8} {'l':>4} {'mu':>6} {'good':>5}  action"]
    lines += [f"{r['label']:>8} {r['iterate']:>4} {r['index']:>6} {str(r['good']):>5}  {r['action']}" for r in rows]
    _emit(args, {"n": system.n, "iterates": rows}, "\n".join(lines))
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    system = _load(args)
    recs = index_spectrum(system, _need_cap(args), args.bits)
    rows = [{"degree": r.index, "orbit": r.label, "iterate": r.iterate, "good": r.good,
             "action": to_text(r.action), "action_value": float(r.action)} for r in recs]
    lines = [f"{'degree':>7} {'iterate':>10} {'good':>5} {'action':>12}"]
    lines += [f"{r['degree']:>7} {r['orbit'] + '^' + str(r['iterate']):>10} {str(r['good']):>5} {r['action_value']:>12.6g}"
              for r in rows]
    _emit(args, {"n": system.n, "cap": to_text(args.cap), "iterates": rows}, "\n".join(lines))
    return EXIT_OK


def _cmd_cij(args) -> int:
    system = _load(args)
    inst = CIJInstance(system, args.M, args.search_bound, args.bits)
    sol = find_common_jump(inst, workers=args.workers)
    report = verify_solution(system, sol, args.bits)
    lines = [f"N = {sol.N}   eps = {to_text(sol.epsilon)}   M = {sol.M}"]
    lines += [f"  {e.label}: m = {e.m}, eta = {e.eta:+d}" for e in sol.entries]
    lines += [f"  {c}" for c in report.checks]
    data = sol.to_json()
    data["checks"] = [{"label": c.label, "check": c.description, "value": c.lhs, "expected": c.rhs, "ok": c.ok}
                      for c in report.checks]
    _emit(args, data, "\n".join(lines))
    return EXIT_OK if report.ok else EXIT_VIOLATION


def _cmd_homology(args) -> int:
    system = _load(args)
    table = generator_table(system, _need_cap(args), args.bits)
    result = morse_feasibility(table, args.bits)
    data = {"table": table.to_json(), "result": result.to_json()}
    if not isinstance(result, Infeasible):
        data["homology"] = {str(k): v for k, v in homology_of_certificate(result).items()}
    _emit(args, data, format_report(table, result))
    if table.window is None:
        return EXIT_INCONCLUSIVE
    return EXIT_VIOLATION if isinstance(result, Infeasible) else EXIT_OK


def _cmd_verify(args) -> int:
    system = _load(args)
    check = args.check
    if check == "convexity":
        report = convexity_report(system, args.bits)
    elif check == "multiplicity":
        thr = system.n + 1 if args.threshold == "n+1" else system.n - 1
        report = multiplicity_audit(system, thr, args.search_bound, args.bits, args.workers)
    elif check == "perfect":
        report = perfectness_check(system, _need_cap(args), args.search_bound, args.bits)
    elif check == "resonance":
        order = resonance_check(system, args.bits)
        a, b = system.orbits
        line = f"A/mean({a.label}) vs A/mean({b.label}): {order.value}"
        if order is Ordering.UNDECIDABLE:
            code = EXIT_INCONCLUSIVE
        elif order is Ordering.EQUAL or system.n % 2 == 0 or system.n < 3:
            code = EXIT_OK
        else:
            # two non-resonant orbits cannot be the whole orbit set when n is odd
            code = EXIT_VIOLATION
        _emit(args, {"check": "resonance", "order": order.value}, line)
        return code
    else:
        report = third_orbit_analysis(system, _need_cap(args), args.bits)
    _emit(args, report.to_json(), report.format())
    return _VERDICT_EXIT[report.verdict]


def _cmd_ellipsoid(args) -> int:
    radii = split_radii(args.radii)
    system = ellipsoid_system(EllipsoidSpec.from_radii(radii), args.bits)
    sys.stdout.write(dumps_dataset(system, notes=f"ellipsoid with radii {args.radii}"))
    return EXIT_OK


def _split_numbers(text: str):
    return split_radii(text) if text.strip() else []


def _cmd_czpath(args) -> int:
    if args.path:
        if args.rotations or args.hyperbolic:
            raise UsageError("czpath: give either a path file or block flags, not both")
        with open(args.path) as fh:
            path = parse_path_text(fh)
        if args.iterate != 1:
            raise UsageError("czpath: --iterate needs a block path")
        spec = None
    else:
        rots = _split_numbers(args.rotations)
        hyp = [HyperbolicBlock.signed(float(h)) for h in _split_numbers(args.hyperbolic)]
        if not rots and not hyp:
            raise UsageError("czpath: need a path file or --rotations/--hyperbolic")
        spec = BlockSpec(tuple(rots), tuple(hyp), args.samples)
        path = iterate_block_path(spec, args.iterate)
    mu = conley_zehnder(path)
    data = {"index": mu, "d": path.d, "samples": len(path.ts)}
    text = f"mu = {mu}"
    if spec is not None:
        rd = spec.iterate(args.iterate).rotation_decomposition()
        data["formula_index"] = rd.p + rd.q  # single iterate of the block data itself
        data["p"], data["q"] = rd.p, rd.q
        text += f"   (p = {rd.p}, q = {rd.q})"
    _emit(args, data, text)
    return EXIT_OK


_COMMANDS = {
    "index": _cmd_index,
    "spectrum": _cmd_spectrum,
    "cij": _cmd_cij,
    "homology": _cmd_homology,
    "verify": _cmd_verify,
    "ellipsoid": _cmd_ellipsoid,
    "czpath": _cmd_czpath,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    with warnings.catch_warnings():
        warnings.simplefilter("always", DatasetWarning)
        warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
        try:
            return _COMMANDS[args.command](args)
        except UsageError as exc:
            print(exc, file=sys.stderr)
            return EXIT_USAGE
        except (DatasetError, PreconditionError, CZPathError, ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except (AmbiguousFloor, UndecidableComparison) as exc:
            print(f"budget exhausted: {exc}", file=sys.stderr)
            return EXIT_BUDGET
        except SearchExhausted as exc:
            print(f"budget exhausted: {exc}", file=sys.stderr)
            return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
