"""Command-line interface: ``limid {validate,reduce,compile,solve,oracle,dot} FILE``.

Exit codes distinguish failure classes so scripts can react to them:
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from .document import DocumentError, emit_document, emit_strategy, parse_document
from .dot import STAGES, emit_dot
from .jtree import compile_limid, hint_from_labels
from .model import Limid, ModelError, validate
from .oracle import OracleTooLarge, oracle_eu, oracle_global_max
from .propagation import InvalidModel, SolveReport, prepare, single_policy_updating
from .structure import NotSoluble, find_solution_ordering, reduce_minimal

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_INVALID = 4
EXIT_NOT_SOLUBLE = 5
EXIT_ORACLE_MISMATCH = 6
EXIT_TOO_LARGE = 7

__doc__ += "\n".join(
    f"    {code}  {what}"
    for code, what in [
        (EXIT_OK, "success"),
        (EXIT_IO, "file could not be read or written"),
        (EXIT_USAGE, "bad command-line arguments"),
        (EXIT_PARSE, "document does not parse"),
        (EXIT_INVALID, "model fails validation"),
        (EXIT_NOT_SOLUBLE, "LIMID has no exact solution ordering"),
        (EXIT_ORACLE_MISMATCH, "solver and brute-force oracle disagree"),
        (EXIT_TOO_LARGE, "model too large for the brute-force oracle"),
    ]
)

ORACLE_TOL = 1e-9


class _Exit(Exception):
    def __init__(self, code: int, message: str, payload: dict | None = None):
        super().__init__(message)
        self.code = code
        self.payload = payload or {}


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot read {path}: {exc.strerror}") from None


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot write {path}: {exc.strerror}") from None


def _load(path: str) -> Limid:
    text = _read(path)
    try:
        model = parse_document(text, check=False)
    except DocumentError as exc:
        payload = {"error": "parse", "message": exc.message, "line": exc.line, "column": exc.column}
        raise _Exit(EXIT_PARSE, f"{path}: {exc}", payload) from None
    report = validate(model)
    if not report.ok:
        payload = {
            "error": "invalid",
            "violations": [
                {"code": v.code, "node": v.node, "message": v.message} for v in report.violations
            ],
        }
        raise _Exit(EXIT_INVALID, f"{path}: invalid model\n{report}", payload)
    return model


def _hint(model: Limid, text: str | None):
    if not text:
        return None
    labels = [s for s in text.replace(",", " ").split() if s]
    try:
        return hint_from_labels(model, labels)
    except ModelError as exc:
        raise _Exit(EXIT_USAGE, f"--elimination-order: {exc}") from None


def _ordering(model: Limid, declared):
    try:
        return find_solution_ordering(model, prefer=declared)
    except NotSoluble as exc:
        payload = {
            "error": "not-soluble",
            "message": str(exc),
            "remaining": model.labels(exc.remaining),
        }
        raise _Exit(EXIT_NOT_SOLUBLE, f"not soluble: {exc}", payload) from None


def _emit(args, lines: list[str], payload: dict) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print("\n".join(lines))


def _removal_lines(model: Limid, trace) -> list[str]:
    if not trace.removed:
        return ["removed arcs: none"]
    out = ["removed arcs:"]
    for r in trace.removed:
        out.append(f"  {model.nodes[r.parent].label} -> {model.nodes[r.decision].label}")
    return out


# ---------------------------------------------------------------------------
# Commands


def cmd_validate(args) -> int:
    model = _load(args.file)
    kind = "influence diagram" if model.is_influence_diagram() else "LIMID"
    lines = [
        f"ok: {model.name or args.file} ({kind}; {len(model.chance_nodes)} chance, "
        f"{len(model.decisions)} decision, {len(model.value_nodes)} value nodes)"
    ]
    _emit(args, lines, {"ok": True, "kind": kind, "name": model.name})
    return EXIT_OK


def cmd_reduce(args) -> int:
    model, declared = prepare(_load(args.file))
    ordering = _ordering(model, declared)
    reduced, trace = reduce_minimal(model, ordering)
    text = emit_document(reduced)
    if args.out:
        _write(args.out, text)
    lines = ["solution ordering: " + " ".join(model.labels(ordering))]
    lines += _removal_lines(model, trace)
    if not args.out:
        lines += ["", text.rstrip("\n")]
    payload = {
        "ordering": model.labels(ordering),
        "removed": [[p, d] for p, d, _ in trace.labelled(model)],
    }
    _emit(args, lines, payload)
    return EXIT_OK


def _compiled(args):
    model, declared = prepare(_load(args.file))
    trace = None
    if not args.no_reduce:
        ordering = _ordering(model, declared)
        model, trace = reduce_minimal(model, ordering)
    return model, compile_limid(model, _hint(model, args.elimination_order)), trace


def cmd_compile(args) -> int:
    model, tree, _ = _compiled(args)
    lines = [
        f"cliques: {len(tree.cliques)}",
        f"largest clique: {tree.max_clique_size} variables, weight {tree.max_clique_weight}",
        "elimination order: " + " ".join(model.labels(tree.elimination_order)),
    ]
    lines += tree.describe()
    payload = {
        "cliques": [model.labels(c) for c in tree.cliques],
        "edges": [[a, b] for a, b in tree.edges],
        "max_clique_size": tree.max_clique_size,
        "max_clique_weight": tree.max_clique_weight,
        "elimination_order": model.labels(tree.elimination_order),
    }
    _emit(args, lines, payload)
    return EXIT_OK


def _oracle_check(model: Limid, report: SolveReport) -> tuple[float, int]:
    """Best EU by enumeration over the reduced model; also re-scores the strategy."""
    try:
        best = oracle_global_max(report.limid)
        scored = oracle_eu(report.limid, report.strategy)
    except OracleTooLarge as exc:
        raise _Exit(EXIT_TOO_LARGE, f"oracle: {exc}") from None
    eu = report.expected_utility
    scale = max(1.0, abs(eu), abs(best.best_eu))
    if abs(eu - best.best_eu) > ORACLE_TOL * scale or abs(eu - scored) > ORACLE_TOL * scale:
        raise _Exit(
            EXIT_ORACLE_MISMATCH,
            f"oracle disagrees: solver EU {_fmt(eu)}, strategy scores {_fmt(scored)}, "
            f"best by enumeration {_fmt(best.best_eu)}",
            {"error": "oracle-mismatch", "solver": eu, "oracle": best.best_eu, "scored": scored},
        )
    return best.best_eu, best.evaluations


def cmd_solve(args) -> int:
    model = _load(args.file)
    prepared, declared = prepare(model)
    _ordering(prepared, declared)
    report = single_policy_updating(
        model,
        reduce=not args.no_reduce,
        theorem5=not args.no_theorem5,
        elimination_order=_hint(prepared, args.elimination_order),
    )
    reduced = report.limid
    tree = report.tree
    labels = reduced.labels
    lines = [
        "solution ordering: " + " ".join(labels(report.ordering)),
        *_removal_lines(prepared, report.reduction),
        f"junction tree: {len(tree.cliques)} cliques, largest {tree.max_clique_size} variables",
        "roots: " + " ".join(f"{reduced.nodes[d].label}@C{c}" for d, c in report.roots),
        f"messages: {report.flows.sent} sent, {report.flows.skipped} skipped",
        f"expected utility: {_fmt(report.expected_utility)}",
    ]
    strategy_text = emit_strategy(reduced, report.strategy)
    payload = {
        "ordering": labels(report.ordering),
        "removed": [[p, d] for p, d, _ in report.reduction.labelled(prepared)],
        "cliques": [labels(c) for c in tree.cliques],
        "roots": [[reduced.nodes[d].label, c] for d, c in report.roots],
        "messages_sent": report.flows.sent,
        "messages_skipped": report.flows.skipped,
        "expected_utility": report.expected_utility,
        "strategy": {
            d: {" ".join(k): v for k, v in rows.items()} for d, rows in report.choices().items()
        },
    }
    if args.trace_flows:
        payload["flows"] = [
            {"seq": f.seq, "from": f.source, "to": f.target, "reason": f.reason}
            for f in report.flows.entries
        ]
        lines += ["flows:"] + ["  " + ln for ln in report.flows.to_text().splitlines()]
    if args.out:
        _write(args.out, strategy_text)
    else:
        lines += ["", strategy_text.rstrip("\n")]
    if args.oracle_check:
        best, count = _oracle_check(model, report)
        lines.append(f"oracle agrees: best EU {_fmt(best)} over {count} pure strategies")
        payload["oracle"] = {"best_eu": best, "strategies": count, "agrees": True}
    _emit(args, lines, payload)
    return EXIT_OK


def cmd_oracle(args) -> int:
    model, _ = prepare(_load(args.file))
    try:
        result = oracle_global_max(model)
    except OracleTooLarge as exc:
        raise _Exit(EXIT_TOO_LARGE, f"oracle: {exc}") from None
    lines = [
        f"best EU: {_fmt(result.best_eu)} over {result.evaluations} pure strategies",
        "",
        emit_strategy(model, result.best_strategy).rstrip("\n"),
    ]
    payload = {"best_eu": result.best_eu, "strategies": result.evaluations}
    _emit(args, lines, payload)
    return EXIT_OK


def cmd_dot(args) -> int:
    if args.stage == "limid":
        model = _load(args.file)
        if args.reduce:
            prepared, declared = prepare(model)
            model, _ = reduce_minimal(prepared, _ordering(prepared, declared))
        text = emit_dot("limid", model)
    else:
        model, tree, _ = _compiled(args)
        text = emit_dot(args.stage, tree, model)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="limid",
        description="Solve influence diagrams and LIMIDs exactly.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("\n", 1)[1],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("file", help="model document ('-' for stdin)")
        p.set_defaults(func=func)
        return p

    def json_flag(p):
        p.add_argument("--json", action="store_true", help="machine-readable output")

    def tree_flags(p):
        p.add_argument("--no-reduce", action="store_true", help="keep non-requisite parents")
        p.add_argument(
            "--elimination-order",
            metavar="LABELS",
            help="triangulate with this elimination order (comma or space separated)",
        )

    json_flag(add("validate", cmd_validate, "check a model document"))

    p = add("reduce", cmd_reduce, "remove non-requisite decision parents")
    p.add_argument("--out", help="write the reduced model here")
    json_flag(p)

    p = add("compile", cmd_compile, "build the junction tree")
    tree_flags(p)
    json_flag(p)

    p = add("solve", cmd_solve, "compute an optimal strategy")
    tree_flags(p)
    p.add_argument("--no-theorem5", action="store_true", help="never skip messages")
    p.add_argument("--trace-flows", action="store_true", help="print every message")
    p.add_argument("--oracle-check", action="store_true", help="cross-check by enumeration")
    p.add_argument("--out", help="write the strategy document here")
    json_flag(p)

    json_flag(add("oracle", cmd_oracle, "best strategy by brute-force enumeration"))

    p = add("dot", cmd_dot, "Graphviz export")
    p.add_argument("--stage", choices=STAGES, default="limid")
    p.add_argument("--reduce", action="store_true", help="for --stage limid: show the reduced model")
    tree_flags(p)
    p.add_argument("--out", help="write DOT here instead of stdout")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        if getattr(args, "json", False) and exc.payload:
            print(json.dumps({"exit": exc.code, **exc.payload}, indent=2, sort_keys=True))
        print(f"limid: {exc}", file=sys.stderr)
        return exc.code
    except InvalidModel as exc:
        print(f"limid: invalid model\n{exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
