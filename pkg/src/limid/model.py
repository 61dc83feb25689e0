"""Core model types: nodes, tables, policies and the LIMID graph itself.

Tables are dense numpy arrays, one axis per variable, in C (row-major)
order so the last variable varies fastest.  Conditional tables (CPTs and
policies) list the parents in ascending node id followed by the node
itself; utility tables list the parents in ascending node id.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

NORMALIZATION_TOL = 1e-9


class ModelError(ValueError):
    """Raised when a model cannot be constructed or queried."""


class NodeKind(enum.Enum):
    CHANCE = "chance"
    DECISION = "decision"
    VALUE = "value"


@dataclass(frozen=True)
class Node:
    id: int
    label: str
    kind: NodeKind
    states: tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return len(self.states)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Table:
    """Dense table over ``vars``; ``values.shape`` has one axis per variable."""

    vars: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(int(v) for v in self.vars))
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.values.ndim != len(self.vars):
            raise ModelError(
                f"table over {len(self.vars)} variables has {self.values.ndim} axes"
            )

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, Table):
            return NotImplemented
        return (
            type(self) is type(other)
            and self.vars == other.vars
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    __hash__ = None


# CPTs and utility tables share one representation; the aliases document intent.
ProbTable = Table
UtilTable = Table


@dataclass(frozen=True, eq=False)
class Policy(Table):
    """Stochastic table for one decision; the decision is the last axis."""

    decision: int = -1

    def __post_init__(self):
        super().__post_init__()
        if not self.vars or self.vars[-1] != self.decision:
            raise ModelError("policy table must have its decision as the last variable")

    @property
    def parents(self) -> tuple[int, ...]:
        return self.vars[:-1]

    def choice(self, parent_config: Sequence[int]) -> int:
        """Alternative prescribed for a parent configuration (argmax for mixed rows)."""
        return int(np.argmax(self.values[tuple(parent_config)]))

    def is_pure(self) -> bool:
        return bool(np.all((self.values == 0.0) | (self.values == 1.0)))


Strategy = dict  # decision id -> Policy


def encode_index(shape: Sequence[int], config: Sequence[int]) -> int:
    """Linear row-major index of a configuration."""
    if len(shape) == 0:
        return 0
    return int(np.ravel_multi_index(tuple(config), tuple(shape)))


def decode_index(shape: Sequence[int], index: int) -> tuple[int, ...]:
    if len(shape) == 0:
        if index != 0:
            raise IndexError(index)
        return ()
    return tuple(int(i) for i in np.unravel_index(index, tuple(shape)))


@dataclass(frozen=True, eq=False)
class Limid:
    """Immutable LIMID (or influence diagram when ``decision_order`` is set).

    ``parents[n]`` is sorted ascending.  ``tables`` maps each chance node to
    its CPT and each value node to its utility table.
    """

    nodes: tuple[Node, ...]
    parents: tuple[tuple[int, ...], ...]
    tables: Mapping[int, Table] = field(default_factory=dict)
    decision_order: tuple[int, ...] | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(
            self, "parents", tuple(tuple(sorted(int(p) for p in ps)) for ps in self.parents)
        )
        object.__setattr__(self, "tables", MappingProxyType(dict(self.tables)))
        if self.decision_order is not None:
            object.__setattr__(self, "decision_order", tuple(self.decision_order))
        if len(self.parents) != len(self.nodes):
            raise ModelError("one parent list per node is required")
        for i, node in enumerate(self.nodes):
            if node.id != i:
                raise ModelError(f"node ids must be dense 0..N-1, got {node.id} at {i}")

    # -- lookups -------------------------------------------------------
    def __len__(self):
        return len(self.nodes)

    @cached_property
    def _by_label(self) -> dict[str, int]:
        return {n.label: n.id for n in self.nodes}

    def id_of(self, label: str) -> int:
        try:
            return self._by_label[label]
        except KeyError:
            raise ModelError(f"unknown node {label!r}") from None

    def ids(self, labels: Iterable[str]) -> set[int]:
        return {self.id_of(lab) for lab in labels}

    def labels(self, ids: Iterable[int]) -> list[str]:
        """Labels in the given order; sets are listed by ascending id."""
        if isinstance(ids, (set, frozenset)):
            ids = sorted(ids)
        return [self.nodes[i].label for i in ids]

    def kind(self, n: int) -> NodeKind:
        return self.nodes[n].kind

    def size(self, n: int) -> int:
        return self.nodes[n].size

    @property
    def sizes(self) -> dict[int, int]:
        return {n.id: n.size for n in self.nodes if n.kind is not NodeKind.VALUE}

    def _of_kind(self, kind: NodeKind) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if n.kind is kind)

    @property
    def chance_nodes(self) -> tuple[int, ...]:
        return self._of_kind(NodeKind.CHANCE)

    @property
    def decisions(self) -> tuple[int, ...]:
        return self._of_kind(NodeKind.DECISION)

    @property
    def value_nodes(self) -> tuple[int, ...]:
        return self._of_kind(NodeKind.VALUE)

    @property
    def variables(self) -> tuple[int, ...]:
        """Chance and decision nodes, ascending."""
        return tuple(n.id for n in self.nodes if n.kind is not NodeKind.VALUE)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.nodes]
        for n, ps in enumerate(self.parents):
            for p in ps:
                if 0 <= p < len(kids):
                    kids[p].append(n)
        return tuple(tuple(sorted(k)) for k in kids)

    @property
    def arcs(self) -> set[tuple[int, int]]:
        return {(p, n) for n, ps in enumerate(self.parents) for p in ps}

    def arc_labels(self) -> set[tuple[str, str]]:
        return {(self.nodes[p].label, self.nodes[n].label) for p, n in self.arcs}

    def is_influence_diagram(self) -> bool:
        return self.decision_order is not None

    # -- functional updates --------------------------------------------
    def replace(self, **changes) -> "Limid":
        fields = dict(
            nodes=self.nodes,
            parents=self.parents,
            tables=dict(self.tables),
            decision_order=self.decision_order,
            name=self.name,
        )
        fields.update(changes)
        return Limid(**fields)

    def with_parents(self, n: int, parents: Iterable[int]) -> "Limid":
        ps = list(self.parents)
        ps[n] = tuple(sorted(set(parents)))
        return self.replace(parents=tuple(ps))

    def __eq__(self, other):
        """Structural and numeric equality; the name is not compared."""
        if not isinstance(other, Limid):
            return NotImplemented
        if (
            self.nodes != other.nodes
            or self.parents != other.parents
            or self.decision_order != other.decision_order
            or set(self.tables) != set(other.tables)
        ):
            return False
        return all(self.tables[k] == other.tables[k] for k in self.tables)

    __hash__ = None

    def __repr__(self):
        return (
            f"Limid(name={self.name!r}, chance={len(self.chance_nodes)}, "
            f"decisions={len(self.decisions)}, values={len(self.value_nodes)}, "
            f"arcs={len(self.arcs)})"
        )


# ---------------------------------------------------------------------------
# Queries


def _check_node(limid: Limid, n: int) -> None:
    if not 0 <= n < len(limid.nodes):
        raise ModelError(f"unknown node id {n}")


def family(limid: Limid, n: int) -> frozenset[int]:
    """fa(n): the parents of ``n`` together with ``n``."""
    _check_node(limid, n)
    return frozenset(limid.parents[n]) | {n}


def canonical_family(limid: Limid, n: int) -> tuple[int, ...]:
    """Variable order used by CPTs and policies: sorted parents, then ``n``."""
    return tuple(limid.parents[n]) + (n,)


def descendants(limid: Limid, n: int) -> frozenset[int]:
    """All nodes reachable from ``n`` by a directed path, excluding ``n``."""
    _check_node(limid, n)
    seen: set[int] = set()
    stack = list(limid.children[n])
    while stack:
        m = stack.pop()
        if m in seen:
            continue
        seen.add(m)
        stack.extend(limid.children[m])
    return frozenset(seen)


def ancestors(limid: Limid, nodes: Iterable[int]) -> frozenset[int]:
    """Nodes with a directed path into ``nodes``; includes ``nodes`` themselves."""
    seen: set[int] = set()
    stack = list(nodes)
    while stack:
        m = stack.pop()
        if m in seen:
            continue
        seen.add(m)
        stack.extend(limid.parents[m])
    return frozenset(seen)


def topological_order(limid: Limid) -> list[int]:
    """Kahn ordering, smallest id first among ready nodes; raises on cycles."""
    indeg = [len(ps) for ps in limid.parents]
    ready = sorted(n for n, d in enumerate(indeg) if d == 0)
    order = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for c in limid.children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
                ready.sort()
    if len(order) != len(limid.nodes):
        raise ModelError("arc relation contains a cycle")
    return order


def total_utility(limid: Limid, x: Mapping[int, int]) -> float:
    """U(x) = sum of the local utility tables evaluated at ``x``."""
    missing = [v for v in limid.variables if v not in x]
    if missing:
        raise ModelError(f"configuration is missing {limid.labels(missing)}")
    total = 0.0
    for u in limid.value_nodes:
        table = limid.tables[u]
        total += float(table.values[tuple(x[v] for v in table.vars)])
    return total


def uniform_policy(limid: Limid, d: int) -> Policy:
    shape = [limid.size(v) for v in canonical_family(limid, d)]
    return Policy(canonical_family(limid, d), np.full(shape, 1.0 / limid.size(d)), decision=d)


def uniform_strategy(limid: Limid) -> dict[int, Policy]:
    return {d: uniform_policy(limid, d) for d in limid.decisions}


def pure_policy(limid: Limid, d: int, choices: Sequence[int]) -> Policy:
    """Degenerate policy; ``choices[i]`` is the alternative for parent configuration i."""
    vars_ = canonical_family(limid, d)
    shape = [limid.size(v) for v in vars_]
    n_rows = int(np.prod(shape[:-1], dtype=int))
    if len(choices) != n_rows:
        raise ModelError(f"expected {n_rows} choices for {limid.nodes[d].label}")
    values = np.zeros((n_rows, shape[-1]))
    values[np.arange(n_rows), list(choices)] = 1.0
    return Policy(vars_, values.reshape(shape), decision=d)


def expand_policy(limid: Limid, policy: Policy) -> Policy:
    """Re-express a policy over the (larger) current parent set of its decision.

    The policy is constant along parents it does not mention; this lifts a
    policy computed in a reduced model back to the original one.
    """
    d = policy.decision
    target = canonical_family(limid, d)
    if not set(policy.vars) <= set(target):
        raise ModelError("policy mentions variables outside the current family")
    shape = [limid.size(v) for v in target]
    src = policy.values
    # insert singleton axes for the new parents, then broadcast
    expanded_shape = [limid.size(v) if v in policy.vars else 1 for v in target]
    order = sorted(range(len(policy.vars)), key=lambda i: target.index(policy.vars[i]))
    src = np.transpose(src, order).reshape(expanded_shape)
    return Policy(target, np.broadcast_to(src, shape).copy(), decision=d)


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    node: str | None = None

    def __str__(self):
        where = f"[{self.node}] " if self.node else ""
        return f"{where}{self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}

    def add(self, code: str, message: str, node: str | None = None) -> None:
        self.violations.append(Violation(code, message, node))

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(str(v) for v in self.violations)


def _check_slices(report, label, kind_name, values):
    """Normalization over the last axis, every conditioning slice."""
    if values.size == 0:
        return
    if np.any(~np.isfinite(values)):
        report.add("nonfinite", f"{kind_name} has non-finite entries", label)
        return
    if np.any(values < 0):
        report.add("negative", f"{kind_name} has negative entries", label)
    sums = values.reshape(-1, values.shape[-1]).sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > NORMALIZATION_TOL)
    for row in bad:
        report.add(
            "not-normalized",
            f"{kind_name} slice not normalized: parent configuration {row} sums to {sums[row]:.12g}",
            label,
        )


def validate(limid: Limid) -> ValidationReport:
    """List every violated structural or numeric invariant; empty iff well-formed."""
    report = ValidationReport()
    n_nodes = len(limid.nodes)
    seen_labels: dict[str, int] = {}
    for node in limid.nodes:
        if not node.label:
            report.add("label", f"node {node.id} has an empty label")
        elif node.label in seen_labels:
            report.add("label", f"duplicate label {node.label!r}", node.label)
        seen_labels.setdefault(node.label, node.id)
        if node.kind is not NodeKind.VALUE and node.size < 1:
            report.add("domain", "domain must have at least one state", node.label)
        if node.kind is NodeKind.VALUE and node.states:
            report.add("domain", "value nodes carry no states", node.label)

    arcs_ok = True
    for n, ps in enumerate(limid.parents):
        for p in ps:
            if not 0 <= p < n_nodes or p == n:
                report.add("arc", f"invalid parent id {p}", limid.nodes[n].label)
                arcs_ok = False
            elif limid.nodes[p].kind is NodeKind.VALUE:
                report.add(
                    "value-has-children",
                    f"value node has children: arc {limid.nodes[p].label} -> {limid.nodes[n].label}",
                    limid.nodes[p].label,
                )
    if arcs_ok:
        try:
            topological_order(limid)
        except ModelError:
            report.add("cycle", "arc relation contains a cycle")

    for node in limid.nodes:
        label = node.label
        table = limid.tables.get(node.id)
        if node.kind is NodeKind.DECISION:
            if table is not None:
                report.add("table", "decision nodes carry no table", label)
            continue
        if table is None:
            what = "CPT" if node.kind is NodeKind.CHANCE else "utility table"
            report.add("table", f"missing {what}", label)
            continue
        if not arcs_ok:
            continue
        expected = (
            canonical_family(limid, node.id)
            if node.kind is NodeKind.CHANCE
            else tuple(limid.parents[node.id])
        )
        if table.vars != expected:
            report.add(
                "table-vars",
                f"table variables {limid.labels(table.vars)} do not match {limid.labels(expected)}",
                label,
            )
            continue
        shape = tuple(limid.nodes[v].size for v in expected)
        if table.values.shape != shape:
            report.add("table-shape", f"table shape {table.values.shape} != {shape}", label)
            continue
        if node.kind is NodeKind.CHANCE:
            _check_slices(report, label, "CPT", table.values)
        elif np.any(~np.isfinite(table.values)):
            report.add("nonfinite", "utility table has non-finite entries", label)

    extra = [k for k in limid.tables if not 0 <= k < n_nodes]
    for k in extra:
        report.add("table", f"table attached to unknown node id {k}")

    if limid.decision_order is not None:
        if sorted(limid.decision_order) != sorted(limid.decisions) or len(
            set(limid.decision_order)
        ) != len(limid.decision_order):
            report.add("decision-order", "decision order must list every decision exactly once")
    return report


def validate_policy(limid: Limid, policy: Policy) -> ValidationReport:
    report = ValidationReport()
    d = policy.decision
    label = limid.nodes[d].label if 0 <= d < len(limid.nodes) else str(d)
    if not 0 <= d < len(limid.nodes) or limid.kind(d) is not NodeKind.DECISION:
        report.add("policy", "policy is not attached to a decision node", label)
        return report
    if policy.vars != canonical_family(limid, d):
        report.add(
            "policy-vars",
            f"policy variables {limid.labels(policy.vars)} do not match fa({label})",
            label,
        )
        return report
    shape = tuple(limid.size(v) for v in policy.vars)
    if policy.values.shape != shape:
        report.add("table-shape", f"policy shape {policy.values.shape} != {shape}", label)
        return report
    _check_slices(report, label, "policy", policy.values)
    return report


# ---------------------------------------------------------------------------
# Construction by label


class LimidBuilder:
    """Incremental, label-based construction of a :class:`Limid`.

    >>> b = LimidBuilder()
    >>> b.chance("coin", ["h", "t"]).value("win")
    ... # doctest: +ELLIPSIS
    <...>
    >>> b.arc("coin", "win").cpt("coin", [], [0.7, 0.3]).utility("win", ["coin"], [1, 0])
    ... # doctest: +ELLIPSIS
    <...>
    >>> b.build().chance_nodes
    (0,)
    """

    def __init__(self, name: str = ""):
        self.name = name
        self._nodes: list[tuple[str, NodeKind, tuple[str, ...]]] = []
        self._index: dict[str, int] = {}
        self._arcs: list[tuple[str, str]] = []
        self._tables: dict[str, tuple[list[str] | None, object]] = {}
        self._order: list[str] | None = None

    def _add(self, label, kind, states):
        if label in self._index:
            raise ModelError(f"duplicate node {label!r}")
        if kind is not NodeKind.VALUE:
            if isinstance(states, int):
                states = [str(i) for i in range(states)]
            states = tuple(str(s) for s in states)
        else:
            states = ()
        self._index[label] = len(self._nodes)
        self._nodes.append((label, kind, states))
        return self

    def chance(self, label: str, states=2):
        return self._add(label, NodeKind.CHANCE, states)

    def decision(self, label: str, states=2):
        return self._add(label, NodeKind.DECISION, states)

    def value(self, label: str):
        return self._add(label, NodeKind.VALUE, ())

    def arc(self, parent: str, child: str):
        self._arcs.append((parent, child))
        return self

    def arcs(self, *pairs: tuple[str, str]):
        for p, c in pairs:
            self.arc(p, c)
        return self

    def cpt(self, label: str, parents: Sequence[str] | None, values):
        """``values`` is row-major over ``parents`` (in the given order) then the node."""
        self._tables[label] = (None if parents is None else list(parents), values)
        return self

    def utility(self, label: str, parents: Sequence[str] | None, values):
        self._tables[label] = (None if parents is None else list(parents), values)
        return self

    def order(self, labels: Sequence[str]):
        self._order = list(labels)
        return self

    def _id(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ModelError(f"unknown node {label!r}") from None

    def build(self) -> Limid:
        nodes = tuple(
            Node(i, label, kind, states) for i, (label, kind, states) in enumerate(self._nodes)
        )
        parents: list[set[int]] = [set() for _ in nodes]
        for p, c in self._arcs:
            parents[self._id(c)].add(self._id(p))
        tables = {}
        for label, (given, values) in self._tables.items():
            n = self._id(label)
            pa = sorted(parents[n])
            if given is None:
                given_ids = pa
            else:
                given_ids = [self._id(g) for g in given]
                if sorted(given_ids) != pa or len(set(given_ids)) != len(given_ids):
                    raise ModelError(
                        f"table for {label!r} lists {given} but the parents are "
                        f"{[nodes[p].label for p in pa]}"
                    )
            tables[n] = _canonical_table(nodes, n, given_ids, values)
        order = None if self._order is None else tuple(self._id(x) for x in self._order)
        return Limid(nodes, tuple(tuple(p) for p in parents), tables, order, self.name)


def _canonical_table(nodes, n, given_ids, values) -> Table:
    node = nodes[n]
    listed = list(given_ids) + ([n] if node.kind is not NodeKind.VALUE else [])
    shape = [nodes[v].size for v in listed]
    arr = np.asarray(values, dtype=float)
    expected = int(np.prod(shape, dtype=int))
    if arr.size != expected:
        if node.kind is NodeKind.VALUE:
            raise ModelError(
                f"utility table for {node.label!r} needs {expected} values, got {arr.size}"
            )
        rows = expected // max(node.size, 1)
        raise ModelError(
            f"CPT for {node.label!r} needs {rows} rows of {node.size} values "
            f"({expected} numbers), got {arr.size}"
        )
    arr = arr.reshape(shape)
    pa_sorted = sorted(given_ids)
    target = pa_sorted + ([n] if node.kind is not NodeKind.VALUE else [])
    perm = [listed.index(v) for v in target]
    return Table(tuple(target), np.transpose(arr, perm))
