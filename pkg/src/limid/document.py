"""Plain-text model and strategy documents.

A model document is a sequence of statements, one per line, plus table
blocks::

    # comment
    name treatment
    chance r1 : healthy sick
    decision d1 : no yes
    value u1
    arc d1 -> r1
    arc r1 d1 -> u1
    order d1                  # only for influence diagrams

    cpt r1 | d1 {
      0.7 0.3                 # one row per parent configuration
      0.9 0.1
    }
    utility u1 | r1 d1 {
      0 -2  5 3
    }

Tables are row-major over the parents *as listed in the block header*,
then the node's own states for a CPT.  Whitespace and line breaks inside
a block are free; only the count of numbers matters.

A strategy document holds ``policy <decision> | <parents> { ... }``
blocks with the same layout as a CPT.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from .model import (
    Limid,
    LimidBuilder,
    ModelError,
    NodeKind,
    Policy,
    canonical_family,
    validate,
    validate_policy,
)

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*$")
_STATE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.\-]*$")


class DocumentError(ValueError):
    """Parse or semantic error with a source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass
class _Token:
    text: str
    line: int
    column: int


def _tokens(text: str):
    """Yield lines as lists of tokens, with comments stripped."""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        toks = [_Token(m.group(), lineno, m.start() + 1) for m in re.finditer(r"\S+", line)]
        # braces and arrows may be glued to neighbours
        split: list[_Token] = []
        for t in toks:
            for m in re.finditer(r"->|[{}|:]|[^\s{}|:]+?(?=->|[{}|:]|$)|[^\s{}|:]+", t.text):
                if m.group():
                    split.append(_Token(m.group(), lineno, t.column + m.start()))
        if split:
            yield lineno, split


def _name(tok: _Token, what: str) -> str:
    pattern = _STATE if what == "state" else _NAME
    if not pattern.match(tok.text):
        raise DocumentError(f"invalid {what} {tok.text!r}", tok.line, tok.column)
    return tok.text


def _read_table(lines, toks: list[_Token]):
    """Split ``kind label [| parents...] { numbers... }`` into
    (label token, parent tokens, numbers); the block may span lines."""
    head = toks[0]
    brace = next((i for i, t in enumerate(toks) if t.text == "{"), None)
    if brace is None:
        last = toks[-1]
        raise DocumentError("expected '{' after the table header", last.line, last.column)
    if brace < 2:
        raise DocumentError("incomplete table header", head.line, head.column)
    label = toks[1]
    rest = toks[2:brace]
    parents: list[_Token] = []
    if rest:
        if rest[0].text != "|":
            raise DocumentError("expected '|' before the parent list", rest[0].line, rest[0].column)
        parents = rest[1:]

    numbers: list[float] = []

    def consume(tokens) -> bool:
        for i, t in enumerate(tokens):
            if t.text == "}":
                if i != len(tokens) - 1:
                    nxt = tokens[i + 1]
                    raise DocumentError("unexpected text after '}'", nxt.line, nxt.column)
                return True
            try:
                numbers.append(float(t.text))
            except ValueError:
                raise DocumentError(f"expected a number, got {t.text!r}", t.line, t.column) from None
        return False

    if consume(toks[brace + 1 :]):
        return label, parents, numbers
    for _, line_toks in lines:
        if consume(line_toks):
            return label, parents, numbers
    raise DocumentError("table block is not closed with '}'", head.line, head.column)


def parse_document(text: str, check: bool = True) -> Limid:
    """Parse a model document.

    With ``check`` (the default) the model must pass :func:`validate`;
    otherwise the first violation is raised as a :class:`DocumentError`.
    """
    builder = LimidBuilder()
    lines = iter(list(_tokens(text)))
    declared: dict[str, _Token] = {}
    table_at: dict[str, _Token] = {}
    arcs: list[tuple[_Token, _Token]] = []
    for lineno, toks in lines:
        head = toks[0]
        kw = head.text
        try:
            if kw == "name":
                if len(toks) != 2:
                    raise DocumentError("expected: name <identifier>", lineno, head.column)
                builder.name = _name(toks[1], "name")
            elif kw in ("chance", "decision"):
                if len(toks) < 4 or toks[2].text != ":":
                    raise DocumentError(f"expected: {kw} <label> : <state> ...", lineno, head.column)
                label = _name(toks[1], "label")
                if label in declared:
                    raise DocumentError(f"node {label!r} declared twice", lineno, toks[1].column)
                states = [_name(t, "state") for t in toks[3:]]
                if len(set(states)) != len(states):
                    raise DocumentError(f"duplicate state for {label!r}", lineno, toks[3].column)
                declared[label] = toks[1]
                getattr(builder, kw)(label, states)
            elif kw == "value":
                if len(toks) != 2:
                    raise DocumentError("expected: value <label>", lineno, head.column)
                label = _name(toks[1], "label")
                if label in declared:
                    raise DocumentError(f"node {label!r} declared twice", lineno, toks[1].column)
                declared[label] = toks[1]
                builder.value(label)
            elif kw == "arc":
                arrows = [i for i, t in enumerate(toks) if t.text == "->"]
                if len(arrows) != 1 or arrows[0] in (1, len(toks) - 1) or arrows[0] != len(toks) - 2:
                    raise DocumentError("expected: arc <parent> ... -> <child>", lineno, head.column)
                child = toks[-1]
                for p in toks[1:-2]:
                    arcs.append((p, child))
            elif kw == "order":
                builder.order([_name(t, "label") for t in toks[1:]])
                for t in toks[1:]:
                    if t.text not in declared:
                        raise DocumentError(f"unknown node {t.text!r}", t.line, t.column)
            elif kw in ("cpt", "utility"):
                label_tok, parent_toks, values = _read_table(lines, toks)
                label = label_tok.text
                if label not in declared:
                    raise DocumentError(f"unknown node {label!r}", label_tok.line, label_tok.column)
                for t in parent_toks:
                    if t.text not in declared:
                        raise DocumentError(f"unknown node {t.text!r}", t.line, t.column)
                if label in table_at:
                    raise DocumentError(f"second table for {label!r}", lineno, head.column)
                table_at[label] = head
                parents = [t.text for t in parent_toks]
                if kw == "cpt":
                    builder.cpt(label, parents, values)
                else:
                    builder.utility(label, parents, values)
            else:
                raise DocumentError(f"unknown statement {kw!r}", lineno, head.column)
        except ModelError as exc:
            raise DocumentError(str(exc), lineno, head.column) from None

    for p, c in arcs:
        for t in (p, c):
            if t.text not in declared:
                raise DocumentError(f"unknown node {t.text!r}", t.line, t.column)
        builder.arc(p.text, c.text)

    # table checks need the final parent sets, so they run after all arcs are known
    for label, tok in table_at.items():
        kind = builder._nodes[builder._index[label]][1]
        expect = "utility" if kind is NodeKind.VALUE else "cpt"
        if tok.text != expect:
            raise DocumentError(f"{label!r} is a {kind.value} node; use a '{expect}' block", tok.line, tok.column)
    try:
        limid = builder.build()
    except ModelError as exc:
        label = next((lab for lab in table_at if repr(lab) in str(exc)), None)
        tok = table_at.get(label) if label else None
        raise DocumentError(str(exc), tok.line if tok else None, tok.column if tok else None) from None
    if check:
        report = validate(limid)
        if not report.ok:
            v = report.violations[0]
            tok = table_at.get(v.node) or declared.get(v.node)
            raise DocumentError(str(v), tok.line if tok else None, tok.column if tok else None)
    return limid


def _fmt(x: float) -> str:
    r = repr(float(x))
    return r[:-2] if r.endswith(".0") else r


def _conditional_rows(limid: Limid, vars_, values) -> list[str]:
    parents = vars_[:-1]
    width = values.shape[-1]
    flat = values.reshape(-1, width)
    out = []
    configs = itertools.product(*[range(limid.size(p)) for p in parents])
    for row, cfg in zip(flat, configs):
        nums = " ".join(_fmt(v) for v in row)
        note = ", ".join(
            f"{limid.nodes[p].label}={limid.nodes[p].states[s]}" for p, s in zip(parents, cfg)
        )
        out.append(f"  {nums}" + (f"    # {note}" if note else ""))
    return out


def emit_document(limid: Limid) -> str:
    """Canonical text for a model; ``parse_document(emit_document(m)) == m``."""
    out = []
    if limid.name:
        out.append(f"name {limid.name}")
    for node in limid.nodes:
        if node.kind is NodeKind.VALUE:
            out.append(f"value {node.label}")
        else:
            out.append(f"{node.kind.value} {node.label} : {' '.join(node.states)}")
    if any(limid.parents):
        out.append("")
    for n, ps in enumerate(limid.parents):
        if ps:
            out.append(f"arc {' '.join(limid.nodes[p].label for p in ps)} -> {limid.nodes[n].label}")
    if limid.decision_order is not None:
        out.append("")
        out.append("order " + " ".join(limid.nodes[d].label for d in limid.decision_order))
    for node in limid.nodes:
        table = limid.tables.get(node.id)
        if table is None:
            continue
        out.append("")
        if node.kind is NodeKind.VALUE:
            parents = table.vars
            head = f"utility {node.label}"
        else:
            parents = table.vars[:-1]
            head = f"cpt {node.label}"
        if parents:
            head += " | " + " ".join(limid.nodes[p].label for p in parents)
        out.append(head + " {")
        if node.kind is NodeKind.VALUE:
            width = table.values.shape[-1] if table.values.ndim else 1
            flat = table.values.reshape(-1)
            for i in range(0, flat.size, width):
                out.append("  " + " ".join(_fmt(v) for v in flat[i : i + width]))
        else:
            out.extend(_conditional_rows(limid, table.vars, table.values))
        out.append("}")
    return "\n".join(out) + "\n"


def parse_strategy(text: str, limid: Limid) -> dict[int, Policy]:
    """Policies keyed by decision id; each block must match the decision's current family."""
    lines = iter(list(_tokens(text)))
    strategy: dict[int, Policy] = {}
    for lineno, toks in lines:
        head = toks[0]
        if head.text != "policy":
            raise DocumentError(f"unknown statement {head.text!r}", lineno, head.column)
        label_tok, parent_toks, values = _read_table(lines, toks)
        try:
            d = limid.id_of(label_tok.text)
            given = [limid.id_of(t.text) for t in parent_toks]
        except ModelError as exc:
            raise DocumentError(str(exc), lineno, label_tok.column) from None
        if limid.kind(d) is not NodeKind.DECISION:
            raise DocumentError(f"{label_tok.text!r} is not a decision", lineno, label_tok.column)
        if sorted(given) != list(limid.parents[d]):
            raise DocumentError(
                f"policy for {label_tok.text!r} must be given "
                f"{limid.labels(limid.parents[d])}",
                lineno,
                label_tok.column,
            )
        listed = given + [d]
        shape = [limid.size(v) for v in listed]
        if len(values) != int(np.prod(shape, dtype=int)):
            raise DocumentError(
                f"policy for {label_tok.text!r} needs {int(np.prod(shape[:-1], dtype=int))} rows "
                f"of {shape[-1]} values, got {len(values)} numbers",
                lineno,
                label_tok.column,
            )
        arr = np.asarray(values).reshape(shape)
        target = canonical_family(limid, d)
        arr = np.transpose(arr, [listed.index(v) for v in target])
        policy = Policy(target, arr, decision=d)
        report = validate_policy(limid, policy)
        if not report.ok:
            raise DocumentError(str(report.violations[0]), lineno, label_tok.column)
        if d in strategy:
            raise DocumentError(f"second policy for {label_tok.text!r}", lineno, head.column)
        strategy[d] = policy
    return strategy


def emit_strategy(limid: Limid, strategy: dict[int, Policy]) -> str:
    out = []
    for d in sorted(strategy):
        pol = strategy[d]
        head = f"policy {limid.nodes[d].label}"
        if pol.parents:
            head += " | " + " ".join(limid.nodes[p].label for p in pol.parents)
        if out:
            out.append("")
        out.append(head + " {")
        out.extend(_conditional_rows(limid, pol.vars, pol.values))
        out.append("}")
    return "\n".join(out) + ("\n" if out else "")
