"""Compilation of a LIMID into an initialized junction tree.

moralize -> triangulate -> build_tree -> initialize.  The elimination order
is unconstrained: any order gives a valid tree for single policy updating.
"""

from __future__ import annotations

import copy
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import Limid, canonical_family
from .potential import (
    Potential,
    combine,
    from_prob_table,
    from_util_table,
    vacuous,
)


class CompileError(RuntimeError):
    pass


class NotChordal(CompileError):
    pass


@dataclass(frozen=True)
class UGraph:
    """Undirected graph over model variables."""

    nodes: tuple[int, ...]
    adj: dict[int, frozenset[int]]
    sizes: dict[int, int]
    labels: dict[int, str] = field(default_factory=dict)
    fill: frozenset[frozenset[int]] = frozenset()

    @property
    def edges(self) -> set[frozenset[int]]:
        return {frozenset((a, b)) for a in self.nodes for b in self.adj[a] if a < b}

    def label_edges(self) -> set[frozenset[str]]:
        return {frozenset(self.labels[v] for v in e) for e in self.edges}

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.adj[a]


MoralGraph = UGraph


def moralize(limid: Limid) -> UGraph:
    """Marry co-parents of every node (decisions and value nodes included),
    drop directions, drop value nodes."""
    vars_ = limid.variables
    adj: dict[int, set[int]] = {v: set() for v in vars_}

    def link(a, b):
        if a != b and a in adj and b in adj:
            adj[a].add(b)
            adj[b].add(a)

    for n, ps in enumerate(limid.parents):
        for p in ps:
            link(p, n)
        for a, b in itertools.combinations(ps, 2):
            link(a, b)
    return UGraph(
        nodes=tuple(vars_),
        adj={v: frozenset(s) for v, s in adj.items()},
        sizes=limid.sizes,
        labels={v: limid.nodes[v].label for v in vars_},
    )


def _weight(nodes: Iterable[int], sizes) -> int:
    w = 1
    for v in nodes:
        w *= sizes[v]
    return w


def triangulate(g: UGraph, hint: Sequence[int] | None = None) -> tuple[UGraph, tuple[int, ...]]:
    """Eliminate nodes, adding fill-in, and return (chordal graph, order).

    Without ``hint`` the next node is the one with the fewest fill-in edges;
    ties go to the smaller clique weight, then the lower id.
    """
    if hint is not None:
        hint = tuple(hint)
        if sorted(hint) != sorted(g.nodes) or len(set(hint)) != len(hint):
            raise ValueError("elimination hint is not a permutation of the graph's nodes")
    work = {v: set(g.adj[v]) for v in g.nodes}
    full = {v: set(g.adj[v]) for v in g.nodes}
    fill: set[frozenset[int]] = set()
    order: list[int] = []
    remaining = set(g.nodes)

    def missing(v):
        nb = sorted(work[v])
        return [(a, b) for a, b in itertools.combinations(nb, 2) if b not in work[a]]

    for step in range(len(g.nodes)):
        if hint is not None:
            v = hint[step]
        else:
            v = min(
                remaining,
                key=lambda n: (len(missing(n)), _weight(work[n] | {n}, g.sizes), n),
            )
        for a, b in missing(v):
            work[a].add(b)
            work[b].add(a)
            full[a].add(b)
            full[b].add(a)
            fill.add(frozenset((a, b)))
        for n in work[v]:
            work[n].discard(v)
        del work[v]
        remaining.discard(v)
        order.append(v)
    chordal = UGraph(
        nodes=g.nodes,
        adj={v: frozenset(s) for v, s in full.items()},
        sizes=g.sizes,
        labels=g.labels,
        fill=frozenset(fill),
    )
    return chordal, tuple(order)


def elimination_cliques(g: UGraph, order: Sequence[int]) -> list[tuple[int, ...]]:
    """Maximal cliques of a graph that is chordal with respect to ``order``."""
    position = {v: i for i, v in enumerate(order)}
    if set(position) != set(g.nodes):
        raise ValueError("order is not a permutation of the graph's nodes")
    raw: list[frozenset[int]] = []
    for v in order:
        later = {n for n in g.adj[v] if position[n] > position[v]}
        for a, b in itertools.combinations(later, 2):
            if not g.has_edge(a, b):
                raise NotChordal(
                    f"graph is not chordal for this order: {g.labels.get(a, a)} and "
                    f"{g.labels.get(b, b)} are not adjacent"
                )
        raw.append(frozenset(later | {v}))
    cliques = []
    for i, c in enumerate(raw):
        if any(c <= raw[j] for j in range(i)):
            continue
        cliques.append(tuple(sorted(c)))
    return cliques


class JunctionTree:
    """Cliques, tree edges, mailboxes and clique potentials.

    Structure is fixed after construction; ``potentials`` and ``mailboxes``
    are mutated by the propagation routines.
    """

    def __init__(self, cliques, edges, sizes, labels=None):
        self.cliques: list[tuple[int, ...]] = [tuple(sorted(c)) for c in cliques]
        self.edges: list[tuple[int, int]] = sorted((min(e), max(e)) for e in edges)
        self.sizes: dict[int, int] = dict(sizes)
        self.labels: dict[int, str] = dict(labels or {})
        self.neighbors: list[list[int]] = [[] for _ in self.cliques]
        for a, b in self.edges:
            self.neighbors[a].append(b)
            self.neighbors[b].append(a)
        for nb in self.neighbors:
            nb.sort()
        self.mailboxes: dict[tuple[int, int], Potential | None] = {}
        for a, b in self.edges:
            self.mailboxes[(a, b)] = None
            self.mailboxes[(b, a)] = None
        self.potentials: list[Potential] | None = None
        self.assignment: dict[int, int] = {}
        self.root: int | None = None
        # compilation by-products, for diagnostics and DOT export
        self.moral_graph: UGraph | None = None
        self.triangulated: UGraph | None = None
        self.elimination_order: tuple[int, ...] = ()

    def __len__(self):
        return len(self.cliques)

    def separator(self, a: int, b: int) -> tuple[int, ...]:
        return tuple(sorted(set(self.cliques[a]) & set(self.cliques[b])))

    def weight(self, i: int) -> int:
        return _weight(self.cliques[i], self.sizes)

    @property
    def max_clique_size(self) -> int:
        return max((len(c) for c in self.cliques), default=0)

    @property
    def max_clique_weight(self) -> int:
        return max((self.weight(i) for i in range(len(self.cliques))), default=0)

    @property
    def total_weight(self) -> int:
        return sum(self.weight(i) for i in range(len(self.cliques)))

    def containing(self, vars_: Iterable[int]) -> list[int]:
        s = set(vars_)
        return [i for i, c in enumerate(self.cliques) if s <= set(c)]

    def path(self, a: int, b: int) -> list[int]:
        """Cliques on the unique tree path from ``a`` to ``b``, inclusive."""
        prev = {a: None}
        queue = deque([a])
        while queue:
            n = queue.popleft()
            if n == b:
                break
            for m in self.neighbors[n]:
                if m not in prev:
                    prev[m] = n
                    queue.append(m)
        if b not in prev:
            raise CompileError(f"cliques {a} and {b} are not connected")
        out = [b]
        while out[-1] != a:
            out.append(prev[out[-1]])
        return out[::-1]

    def distance(self, a: int, b: int) -> int:
        return len(self.path(a, b)) - 1

    def clear_mailboxes(self) -> None:
        for k in self.mailboxes:
            self.mailboxes[k] = None
        self.root = None

    def copy(self) -> "JunctionTree":
        return copy.copy(self)

    def __copy__(self):
        new = JunctionTree.__new__(JunctionTree)
        new.__dict__.update(self.__dict__)
        new.mailboxes = dict(self.mailboxes)
        new.potentials = None if self.potentials is None else list(self.potentials)
        new.assignment = dict(self.assignment)
        return new

    def is_tree(self) -> bool:
        n = len(self.cliques)
        if n == 0:
            return not self.edges
        if len(self.edges) != n - 1:
            return False
        seen = {0}
        stack = [0]
        while stack:
            for m in self.neighbors[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return len(seen) == n

    def has_running_intersection(self) -> bool:
        for a, b in itertools.combinations(range(len(self.cliques)), 2):
            common = set(self.cliques[a]) & set(self.cliques[b])
            if not common:
                continue
            for c in self.path(a, b):
                if not common <= set(self.cliques[c]):
                    return False
        return True

    def describe(self) -> list[str]:
        def name(c):
            return "{" + ", ".join(self.labels.get(v, str(v)) for v in c) + "}"

        lines = [f"C{i} {name(c)}" for i, c in enumerate(self.cliques)]
        lines += [f"C{a} -- C{b} sep {name(self.separator(a, b))}" for a, b in self.edges]
        return lines


def build_tree(chordal: UGraph, order: Sequence[int]) -> JunctionTree:
    """Maximal cliques joined by a maximum-weight spanning tree on separator sizes.

    Kruskal over all clique pairs, heavier separators first, ties by the
    lexicographically smaller clique-index pair; empty separators join
    disconnected components.
    """
    cliques = elimination_cliques(chordal, order)
    candidates = []
    for a, b in itertools.combinations(range(len(cliques)), 2):
        w = len(set(cliques[a]) & set(cliques[b]))
        candidates.append((-w, a, b))
    candidates.sort()
    parent = list(range(len(cliques)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = []
    for _, a, b in candidates:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            edges.append((a, b))
    tree = JunctionTree(cliques, edges, chordal.sizes, chordal.labels)
    tree.triangulated = chordal
    tree.elimination_order = tuple(order)
    return tree


def _host(tree: JunctionTree, vars_: Iterable[int]) -> int:
    hosts = tree.containing(vars_)
    if not hosts:
        raise CompileError(
            "no clique contains {" + ", ".join(tree.labels.get(v, str(v)) for v in vars_) + "}"
        )
    return min(hosts, key=lambda i: (tree.weight(i), i))


def initialize(tree: JunctionTree, limid: Limid) -> JunctionTree:
    """Vacuous clique potentials, then every CPT multiplied into and every
    utility table added to its host clique."""
    tree = tree.copy()
    if not tree.cliques and (limid.value_nodes or limid.variables):
        raise CompileError("tree has no cliques for a non-empty model")
    pots = [vacuous(c, tree.sizes) for c in tree.cliques]
    assignment: dict[int, int] = {}
    for n in limid.chance_nodes:
        table = limid.tables[n]
        host = _host(tree, table.vars)
        pots[host] = combine(pots[host], from_prob_table(table))
        assignment[n] = host
    for u in limid.value_nodes:
        table = limid.tables[u]
        host = _host(tree, table.vars)
        pots[host] = combine(pots[host], from_util_table(table))
        assignment[u] = host
    tree.potentials = pots
    tree.assignment = assignment
    tree.clear_mailboxes()
    return tree


def compile_limid(limid: Limid, hint: Sequence[int] | None = None) -> JunctionTree:
    """Moralize, triangulate (min-fill unless ``hint`` is given), build and
    initialize the junction tree for ``limid``."""
    moral = moralize(limid)
    chordal, order = triangulate(moral, hint)
    tree = build_tree(chordal, order)
    if not tree.cliques and limid.value_nodes:
        # only constant utilities: one empty clique hosts them
        tree = JunctionTree([()], [], {}, {})
        tree.triangulated = chordal
    tree.moral_graph = moral
    for n in limid.variables:
        fam = canonical_family(limid, n)
        if not tree.containing(fam):
            raise CompileError(f"family of {limid.nodes[n].label} is not covered by any clique")
    for u in limid.value_nodes:
        if not tree.containing(limid.parents[u]):
            raise CompileError(f"parents of {limid.nodes[u].label} are not covered by any clique")
    out = initialize(tree, limid)
    out.moral_graph = moral
    return out


compile = compile_limid  # noqa: A001


def hint_from_labels(limid: Limid, labels: Sequence[str]) -> tuple[int, ...]:
    return tuple(limid.id_of(lab) for lab in labels)
