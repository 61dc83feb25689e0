import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import TREATMENT_HINT
from limid.generate import random_limid, random_small_limid
from limid.jtree import (
    JunctionTree,
    NotChordal,
    UGraph,
    compile_limid,
    elimination_cliques,
    hint_from_labels,
    moralize,
    triangulate,
)
from limid.model import LimidBuilder, ModelError, canonical_family
from limid.oracle import joint_tables
from limid.potential import combine_all
from limid.structure import find_solution_ordering, reduce_minimal


def _nx(g: UGraph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(g.nodes)
    h.add_edges_from(tuple(e) for e in g.edges)
    return h


def _check_tree(tree: JunctionTree, limid):
    assert tree.is_tree()
    assert tree.has_running_intersection()
    for n in limid.variables:
        assert tree.containing(canonical_family(limid, n)), limid.nodes[n].label
    for u in limid.value_nodes:
        assert tree.containing(limid.parents[u])


def test_moral_graph_of_treatment_model(fig3):
    g = moralize(fig3)
    assert set(g.labels.values()) == {"r1", "r2", "r3", "r4", "d1", "d2", "d3", "d4"}
    expected = {
        ("d1", "r1"), ("d1", "d2"), ("r1", "r4"), ("r4", "r3"), ("d2", "r2"), ("d2", "d3"),
        ("d2", "d4"), ("r4", "d4"), ("d2", "r4"), ("d3", "r2"), ("r2", "d4"),
    }
    assert g.label_edges() == {frozenset(e) for e in expected}


@given(st.integers(0, 2**31 - 1))
def test_moralize_matches_networkx(seed):
    m = random_limid(np.random.default_rng(seed), n_chance=4, n_decisions=2, n_value=2)
    dag = nx.DiGraph(list(m.arcs))
    dag.add_nodes_from(range(len(m.nodes)))
    expected = nx.moral_graph(dag).subgraph(m.variables)
    assert moralize(m).edges == {frozenset(e) for e in expected.edges}


@given(st.integers(0, 2**31 - 1), st.booleans())
def test_triangulation_is_chordal_supergraph(seed, use_hint):
    rng = np.random.default_rng(seed)
    m = random_limid(rng, n_chance=6, n_decisions=2, n_value=2, density=0.6)
    g = moralize(m)
    hint = [int(v) for v in rng.permutation(list(g.nodes))] if use_hint else None
    chordal, order = triangulate(g, hint)
    if hint is not None:
        assert list(order) == hint
    assert sorted(order) == sorted(g.nodes)
    assert g.edges <= chordal.edges
    assert chordal.edges - g.edges == set(chordal.fill)
    h = _nx(chordal)
    assert nx.is_chordal(h)
    cliques = {frozenset(c) for c in elimination_cliques(chordal, order)}
    assert cliques == {frozenset(c) for c in nx.find_cliques(h)}


def test_triangulate_rejects_bad_hint(fig3):
    g = moralize(fig3)
    with pytest.raises(ValueError):
        triangulate(g, [0, 1])


def test_elimination_cliques_detects_non_chordal_graph():
    adj = {0: frozenset({1, 3}), 1: frozenset({0, 2}), 2: frozenset({1, 3}), 3: frozenset({0, 2})}
    square = UGraph((0, 1, 2, 3), adj, {v: 2 for v in range(4)})
    with pytest.raises(NotChordal):
        elimination_cliques(square, [0, 1, 2, 3])


def test_min_fill_needs_no_fill_on_chordal_graph():
    adj = {0: frozenset({1}), 1: frozenset({0, 2}), 2: frozenset({1})}
    chain = UGraph((0, 1, 2), adj, {0: 2, 1: 2, 2: 2})
    chordal, order = triangulate(chain)
    assert not chordal.fill
    assert order[0] == 0  # ties on fill and weight go to the lower id


def test_treatment_tree_with_hint(fig3):
    tree = compile_limid(fig3, hint_from_labels(fig3, TREATMENT_HINT))
    named = {frozenset(fig3.labels(c)) for c in tree.cliques}
    assert len(tree.cliques) == 5
    assert tree.max_clique_size == 4
    for c in [{"r1", "d4", "d2", "r4"}, {"d2", "r2", "d3"}, {"d1", "r1", "d2"}]:
        assert frozenset(c) in named
    _check_tree(tree, fig3)


def test_single_clique_and_two_clique_trees():
    b = LimidBuilder()
    b.chance("a").value("u").arc("a", "u").cpt("a", [], [0.5, 0.5]).utility("u", ["a"], [1, 2])
    tree = compile_limid(b.build())
    assert len(tree.cliques) == 1 and not tree.edges
    b = LimidBuilder()
    b.chance("a").chance("b").chance("c").arcs(("a", "b"), ("b", "c"))
    b.cpt("a", [], [0.5, 0.5]).cpt("b", ["a"], [1, 0, 0, 1]).cpt("c", ["b"], [1, 0, 0, 1])
    m = b.build()
    tree = compile_limid(m)
    assert len(tree.cliques) == 2 and len(tree.edges) == 1
    a, c = tree.edges[0]
    assert tree.separator(a, c) == (m.id_of("b"),)


def test_constant_utility_only_model():
    b = LimidBuilder()
    b.value("u").utility("u", [], [3.0])
    tree = compile_limid(b.build())
    assert tree.cliques == [()]


@given(st.integers(0, 2**31 - 1))
def test_compiled_trees_satisfy_invariants(seed):
    m = random_limid(np.random.default_rng(seed), n_chance=6, n_decisions=3, n_value=3)
    _check_tree(compile_limid(m), m)


@given(st.integers(0, 2**31 - 1))
def test_initialization_reproduces_joint(seed):
    m = random_limid(np.random.default_rng(seed), n_chance=5, n_decisions=2, n_value=3)
    tree = compile_limid(m)
    joint = combine_all(tree.potentials)
    f, u = joint_tables(m)
    assert joint.vars == m.variables
    assert np.allclose(joint.prob, f, rtol=1e-12, atol=1e-15)
    assert np.allclose(joint.util, np.broadcast_to(u, f.shape), rtol=1e-12, atol=1e-12)
    assert all(v is None for v in tree.mailboxes.values())


def test_tables_go_to_the_smallest_host(fig3):
    tree = compile_limid(fig3, hint_from_labels(fig3, TREATMENT_HINT))
    u3 = fig3.id_of("u3")
    host = tree.assignment[u3]
    assert fig3.labels(tree.cliques[host]) == ["r3", "r4"]
    for n, c in tree.assignment.items():
        table_vars = fig3.tables[n].vars
        weights = [tree.weight(i) for i in tree.containing(table_vars)]
        assert tree.weight(c) == min(weights)


def test_reduction_never_enlarges_cliques():
    rng = np.random.default_rng(7)
    for _ in range(50):
        m = random_small_limid(rng, max_variables=10)
        full = compile_limid(m)
        reduced, _ = reduce_minimal(m, find_solution_ordering(m))
        small = compile_limid(reduced, full.elimination_order)
        assert small.max_clique_weight <= full.max_clique_weight


def test_hint_from_labels_rejects_unknown(fig3):
    with pytest.raises(ModelError):
        hint_from_labels(fig3, ["nope"])


def test_path_and_distance(fig3):
    tree = compile_limid(fig3, hint_from_labels(fig3, TREATMENT_HINT))
    for a, b in itertools.product(range(len(tree.cliques)), repeat=2):
        p = tree.path(a, b)
        assert p[0] == a and p[-1] == b
        assert all(y in tree.neighbors[x] for x, y in zip(p, p[1:]))
        assert tree.distance(a, b) == len(p) - 1


def test_compilation_is_deterministic():
    for seed in range(20):
        m = random_limid(np.random.default_rng(seed), n_chance=7, n_decisions=2, n_value=3)
        a, b = compile_limid(m), compile_limid(m)
        assert a.cliques == b.cliques and a.edges == b.edges
        assert a.elimination_order == b.elimination_order
        assert a.assignment == b.assignment
        assert all(
            x.vars == y.vars and x.prob.tobytes() == y.prob.tobytes() and x.util.tobytes() == y.util.tobytes()
            for x, y in zip(a.potentials, b.potentials)
        )
