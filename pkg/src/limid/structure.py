"""Graph-level reasoning over LIMIDs.

d-separation runs on the full DAG, value nodes included.  Everything here
is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import (
    Limid,
    ModelError,
    Node,
    NodeKind,
    Policy,
    Table,
    canonical_family,
    descendants,
    family,
    topological_order,
    uniform_policy,
    validate_policy,
)


class NotSoluble(Exception):
    """No exact solution ordering exists for the LIMID."""

    def __init__(self, message: str, solved: Sequence[int] = (), remaining: Sequence[int] = ()):
        super().__init__(message)
        self.solved = tuple(solved)
        self.remaining = tuple(remaining)


SolutionOrdering = tuple  # decision ids d_1..d_k


@dataclass(frozen=True)
class Removal:
    parent: int
    decision: int
    visit: int


@dataclass
class ReductionTrace:
    removed: list[Removal] = field(default_factory=list)

    def arcs(self) -> set[tuple[int, int]]:
        return {(r.parent, r.decision) for r in self.removed}

    def labelled(self, limid: Limid) -> list[tuple[str, str, int]]:
        return [
            (limid.nodes[r.parent].label, limid.nodes[r.decision].label, r.visit)
            for r in self.removed
        ]

    def __len__(self):
        return len(self.removed)


# ---------------------------------------------------------------------------
# d-separation


def _reachable(limid: Limid, sources: Iterable[int], given: frozenset[int]) -> set[int]:
    """Nodes connected to ``sources`` by an active trail given ``given``.

    Bayes-ball style traversal: a node is entered either from a child
    ("up") or from a parent ("down").
    """
    anc_given = set()
    stack = list(given)
    while stack:
        n = stack.pop()
        if n not in anc_given:
            anc_given.add(n)
            stack.extend(limid.parents[n])

    reached: set[int] = set()
    visited: set[tuple[int, bool]] = set()
    stack2 = [(s, True) for s in sources]
    while stack2:
        n, up = stack2.pop()
        if (n, up) in visited:
            continue
        visited.add((n, up))
        if n not in given:
            reached.add(n)
        if up:
            if n not in given:
                stack2.extend((p, True) for p in limid.parents[n])
                stack2.extend((c, False) for c in limid.children[n])
        else:
            if n not in given:
                stack2.extend((c, False) for c in limid.children[n])
            if n in anc_given:
                stack2.extend((p, True) for p in limid.parents[n])
    return reached


def d_separated(limid: Limid, a: Iterable[int], b: Iterable[int], s: Iterable[int] = ()) -> bool:
    """True iff every trail between ``a`` and ``b`` is blocked by ``s``."""
    a, b, s = frozenset(a), frozenset(b), frozenset(s)
    if a & b or a & s or b & s:
        raise ValueError("d-separation arguments must be pairwise disjoint")
    for n in a | b | s:
        if not 0 <= n < len(limid.nodes):
            raise ModelError(f"unknown node id {n}")
    if not a or not b:
        return True
    return not (_reachable(limid, a, s) & b)


def utility_descendants(limid: Limid, d: int) -> frozenset[int]:
    return frozenset(n for n in descendants(limid, d) if limid.kind(n) is NodeKind.VALUE)


def _require_decision(limid: Limid, d: int) -> None:
    if not 0 <= d < len(limid.nodes) or limid.kind(d) is not NodeKind.DECISION:
        raise ModelError(f"node {d} is not a decision")


# ---------------------------------------------------------------------------
# Influence diagram to LIMID


def make_limid_version(influence_diagram: Limid) -> Limid:
    """Make no-forgetting explicit: fa(d_j) -> d_i for every j < i.

    The result carries no decision order; it is a plain LIMID whose exact
    solution ordering is the declared order.
    """
    order = influence_diagram.decision_order
    if order is None:
        raise ModelError("influence diagram has no decision order")
    if sorted(order) != sorted(influence_diagram.decisions) or len(set(order)) != len(order):
        raise ModelError("decision order must list every decision exactly once")
    parents = [set(ps) for ps in influence_diagram.parents]
    remembered: set[int] = set()
    for d in order:
        parents[d] |= remembered - {d}
        remembered |= family(influence_diagram, d)
    out = influence_diagram.replace(
        parents=tuple(tuple(sorted(p)) for p in parents), decision_order=None
    )
    try:
        topological_order(out)
    except ModelError:
        raise ModelError(
            "declared decision order contradicts the arcs (no-forgetting arcs create a cycle)"
        ) from None
    return out


# ---------------------------------------------------------------------------
# Requisite parents and reduction


def requisite_parents(limid: Limid, d: int) -> tuple[frozenset[int], frozenset[int]]:
    """Split pa(d) into (requisite, non_requisite)."""
    _require_decision(limid, d)
    fa = family(limid, d)
    utils = utility_descendants(limid, d)
    req, non = set(), set()
    for n in limid.parents[d]:
        cond = fa - {n}
        if all(d_separated(limid, {u}, {n}, cond) for u in utils):
            non.add(n)
        else:
            req.add(n)
    return frozenset(req), frozenset(non)


def reduce_minimal(limid: Limid, ordering: Sequence[int]) -> tuple[Limid, ReductionTrace]:
    """Remove non-requisite decision-parent arcs visiting d_k, ..., d_1.

    At each visit all currently non-requisite parents are removed, then the
    test is repeated until the decision's parent set is stable.
    """
    ordering = tuple(ordering)
    if sorted(ordering) != sorted(limid.decisions) or len(set(ordering)) != len(ordering):
        raise ModelError("ordering is not a permutation of the decisions")
    trace = ReductionTrace()
    current = limid.replace(decision_order=None)
    for visit, d in enumerate(reversed(ordering)):
        while True:
            _, non = requisite_parents(current, d)
            if not non:
                break
            for p in sorted(non):
                trace.removed.append(Removal(p, d, visit))
            current = current.with_parents(d, set(current.parents[d]) - non)
    return current, trace


# ---------------------------------------------------------------------------
# Extremality and solution orderings


def _extremal_among(limid: Limid, d: int, decisions: Iterable[int]) -> bool:
    fa = family(limid, d)
    others: set[int] = set()
    for e in decisions:
        if e != d:
            others |= family(limid, e)
    others -= fa
    if not others:
        return True
    return all(d_separated(limid, {u}, others, fa) for u in utility_descendants(limid, d))


def is_extremal(limid: Limid, d: int) -> bool:
    """Utility descendants of ``d`` are d-separated from the other decision
    families by fa(d)."""
    _require_decision(limid, d)
    return _extremal_among(limid, d, limid.decisions)


def is_exact_solution_ordering(limid: Limid, ordering: Sequence[int]) -> bool:
    ordering = tuple(ordering)
    if sorted(ordering) != sorted(limid.decisions) or len(set(ordering)) != len(ordering):
        return False
    for i, d in enumerate(ordering):
        if not _extremal_among(limid, d, ordering[: i + 1]):
            return False
    return True


def find_solution_ordering(limid: Limid, prefer: Sequence[int] | None = None) -> tuple[int, ...]:
    """Exact solution ordering d_1..d_k, or raise :class:`NotSoluble`.

    ``prefer`` is returned unchanged when it is itself exact.  Otherwise
    decisions are picked greedily from the end: any extremal decision
    among those still unsolved, highest id first.
    """
    if prefer is not None and is_exact_solution_ordering(limid, prefer):
        return tuple(prefer)
    remaining = set(limid.decisions)
    picked: list[int] = []
    while remaining:
        for d in sorted(remaining, reverse=True):
            if _extremal_among(limid, d, remaining):
                picked.append(d)
                remaining.discard(d)
                break
        else:
            labels = limid.labels(set(remaining))
            raise NotSoluble(
                f"no extremal decision among {', '.join(labels)}",
                solved=tuple(reversed(picked)),
                remaining=tuple(sorted(remaining)),
            )
    return tuple(reversed(picked))


def is_soluble(limid: Limid) -> bool:
    try:
        find_solution_ordering(limid)
    except NotSoluble:
        return False
    return True


# ---------------------------------------------------------------------------
# Decision to chance conversion


def convert_to_chance(limid: Limid, d: int, policy: Policy | None = None) -> Limid:
    """Turn decision ``d`` into a chance node whose CPT is ``policy``."""
    _require_decision(limid, d)
    if policy is None:
        policy = uniform_policy(limid, d)
    if policy.decision != d:
        raise ModelError("policy belongs to another decision")
    report = validate_policy(limid, policy)
    if not report.ok:
        raise ModelError(f"invalid policy for {limid.nodes[d].label}: {report}")
    old = limid.nodes[d]
    nodes = list(limid.nodes)
    nodes[d] = Node(old.id, old.label, NodeKind.CHANCE, old.states)
    tables = dict(limid.tables)
    tables[d] = Table(canonical_family(limid, d), np.array(policy.values))
    order = limid.decision_order
    if order is not None:
        order = tuple(e for e in order if e != d)
    return limid.replace(nodes=tuple(nodes), tables=tables, decision_order=order)
