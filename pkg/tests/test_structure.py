import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from limid.generate import random_influence_diagram, random_limid, random_small_limid
from limid.model import LimidBuilder, ModelError, NodeKind, descendants, pure_policy
from limid.oracle import oracle_global_max
from limid.structure import (
    NotSoluble,
    convert_to_chance,
    d_separated,
    find_solution_ordering,
    is_exact_solution_ordering,
    is_extremal,
    is_soluble,
    make_limid_version,
    reduce_minimal,
    requisite_parents,
    utility_descendants,
)


def _trail_active(limid, path, given):
    for prev, mid, nxt in zip(path, path[1:], path[2:]):
        collider = prev in limid.parents[mid] and nxt in limid.parents[mid]
        if collider:
            if not ({mid} | descendants(limid, mid)) & given:
                return False
        elif mid in given:
            return False
    return True


def dsep_by_paths(limid, a, b, given):
    """Enumerate every simple trail in the skeleton and test it directly."""
    adj = {n: set(limid.parents[n]) | set(limid.children[n]) for n in range(len(limid.nodes))}

    def trails(start, goal):
        stack = [(start, [start])]
        while stack:
            node, path = stack.pop()
            if node == goal:
                yield path
                continue
            for nb in adj[node]:
                if nb not in path:
                    stack.append((nb, path + [nb]))

    for x in a:
        for y in b:
            for path in trails(x, y):
                if _trail_active(limid, path, frozenset(given)):
                    return False
    return True


def _digraph(limid):
    g = nx.DiGraph()
    g.add_nodes_from(range(len(limid.nodes)))
    g.add_edges_from(limid.arcs)
    return g


@given(st.integers(0, 2**31 - 1), st.data())
def test_d_separation_matches_trail_enumeration_and_networkx(seed, data):
    m = random_limid(np.random.default_rng(seed), n_chance=3, n_decisions=2, n_value=2, density=0.6)
    n = len(m.nodes)
    nodes = list(range(n))
    a = data.draw(st.sets(st.sampled_from(nodes), min_size=1, max_size=2))
    b = data.draw(st.sets(st.sampled_from([v for v in nodes if v not in a]), min_size=1, max_size=2))
    rest = [v for v in nodes if v not in a and v not in b]
    s = data.draw(st.sets(st.sampled_from(rest), max_size=3)) if rest else set()
    expected = dsep_by_paths(m, a, b, s)
    assert d_separated(m, a, b, s) == expected
    assert nx.is_d_separator(_digraph(m), a, b, s) == expected


def test_d_separation_argument_checks(fig3):
    with pytest.raises(ValueError):
        d_separated(fig3, {0}, {0}, set())
    with pytest.raises(ModelError):
        d_separated(fig3, {0}, {99}, set())
    assert d_separated(fig3, set(), {1}, set())


def test_treatment_d_separations(fig3):
    lab = fig3.ids
    # the test result screens the report off from the first-stage treatment
    assert d_separated(fig3, lab(["r3"]), lab(["d1"]), lab(["r4"]))
    assert not d_separated(fig3, lab(["r3"]), lab(["d1"]), set())
    # r2 and r4 are linked through d2 <- d1 -> r1 -> r4; observing u2 opens a collider
    assert not d_separated(fig3, lab(["r2"]), lab(["r4"]), set())
    assert d_separated(fig3, lab(["r2"]), lab(["r4"]), lab(["d2"]))
    assert not d_separated(fig3, lab(["r2"]), lab(["r4"]), lab(["d2", "u2"]))


def test_utility_descendants(fig3):
    assert fig3.labels(utility_descendants(fig3, fig3.id_of("d4"))) == ["u2", "u4"]
    assert fig3.labels(utility_descendants(fig3, fig3.id_of("d2"))) == ["u1", "u2", "u4"]


def test_make_limid_version_adds_no_forgetting_arcs(fig1, fig2):
    lv = make_limid_version(fig1)
    assert lv.decision_order is None
    assert lv.arcs == fig2.arcs
    assert lv == fig2


def test_make_limid_version_requires_order(fig2):
    with pytest.raises(ModelError):
        make_limid_version(fig2)


def test_make_limid_version_detects_cycles():
    b = LimidBuilder()
    b.decision("a").decision("b").chance("x").arcs(("a", "x"), ("x", "b"))
    b.cpt("x", ["a"], [1, 0, 0, 1]).order(["b", "a"])
    with pytest.raises(ModelError, match="cycle"):
        make_limid_version(b.build())


def test_requisite_parents_of_treatment_decisions(fig2):
    req, non = requisite_parents(fig2, fig2.id_of("d4"))
    assert fig2.labels(req) == ["r4", "d2"]
    assert fig2.labels(non) == ["d1", "d3"]


def test_reduction_of_treatment_model(fig2, fig3):
    ordering = find_solution_ordering(fig2)
    assert fig2.labels(ordering) == ["d1", "d2", "d3", "d4"]
    reduced, trace = reduce_minimal(fig2, ordering)
    assert {(fig2.nodes[p].label, fig2.nodes[d].label) for p, d in trace.arcs()} == {
        ("d1", "d4"),
        ("d3", "d4"),
        ("d1", "d3"),
    }
    assert reduced.arcs == fig3.arcs
    # the minimal reduction is a fixed point
    again, trace2 = reduce_minimal(reduced, ordering)
    assert len(trace2) == 0 and again == reduced


def test_reduction_visits_later_decisions_first(fig2):
    _, trace = reduce_minimal(fig2, find_solution_ordering(fig2))
    visited = [fig2.nodes[r.decision].label for r in trace.removed]
    assert visited == ["d4", "d4", "d3"]


def test_coordination_is_not_soluble(coordination):
    assert not is_soluble(coordination)
    with pytest.raises(NotSoluble) as err:
        find_solution_ordering(coordination)
    assert set(err.value.remaining) == set(coordination.decisions)
    assert not is_extremal(coordination, coordination.id_of("a"))


def test_prefer_is_used_only_when_exact(fig2):
    ordering = find_solution_ordering(fig2)
    assert find_solution_ordering(fig2, prefer=ordering) == ordering
    backwards = tuple(reversed(ordering))
    assert not is_exact_solution_ordering(fig2, backwards)
    assert find_solution_ordering(fig2, prefer=backwards) == ordering


def test_convert_to_chance(fig3):
    d4 = fig3.id_of("d4")
    pol = pure_policy(fig3, d4, [0, 0, 1, 1])
    m = convert_to_chance(fig3, d4, pol)
    assert m.kind(d4) is NodeKind.CHANCE
    assert m.tables[d4].values.tolist() == pol.values.tolist()
    assert d4 not in m.decisions
    uniform = convert_to_chance(fig3, d4)
    assert np.allclose(uniform.tables[d4].values, 0.5)
    with pytest.raises(ModelError):
        convert_to_chance(fig3, fig3.id_of("r1"))


@given(st.integers(0, 2**31 - 1))
def test_influence_diagram_limid_version_is_soluble_in_declared_order(seed):
    m = random_influence_diagram(np.random.default_rng(seed))
    lv = make_limid_version(m)
    assert is_exact_solution_ordering(lv, m.decision_order)


@given(st.integers(0, 2**31 - 1))
def test_reduction_keeps_the_optimal_value(seed):
    m = random_small_limid(np.random.default_rng(seed), max_variables=6)
    ordering = find_solution_ordering(m)
    reduced, trace = reduce_minimal(m, ordering)
    assert reduced.arcs == m.arcs - trace.arcs()
    assert is_exact_solution_ordering(reduced, ordering)
    best = oracle_global_max(m).best_eu
    assert oracle_global_max(reduced).best_eu == pytest.approx(best, rel=1e-9, abs=1e-9)


@given(st.integers(0, 2**31 - 1))
def test_removed_parents_are_d_separated_from_utility(seed):
    m = random_small_limid(np.random.default_rng(seed), max_variables=7)
    ordering = find_solution_ordering(m)
    reduced, _ = reduce_minimal(m, ordering)
    for d in reduced.decisions:
        req, non = requisite_parents(reduced, d)
        assert not non


def test_d_separation_on_larger_graphs():
    for seed in range(500):
        rng = np.random.default_rng(seed)
        m = random_limid(rng, n_chance=6, n_decisions=3, n_value=3, density=0.35, max_parents=2)
        assert len(m.nodes) <= 12
        nodes = rng.permutation(len(m.nodes))
        a, b = {int(nodes[0])}, {int(nodes[1])}
        s = {int(v) for v in nodes[2 : 2 + int(rng.integers(0, 4))]}
        assert d_separated(m, a, b, s) == dsep_by_paths(m, a, b, s), seed


@given(st.integers(0, 2**31 - 1))
def test_minimal_reduction_does_not_depend_on_the_ordering(seed):
    m = random_small_limid(np.random.default_rng(seed), max_variables=8)
    exact = [o for o in itertools.permutations(m.decisions) if is_exact_solution_ordering(m, o)]
    assert exact
    arc_sets = {frozenset(reduce_minimal(m, o)[0].arcs) for o in exact}
    assert len(arc_sets) == 1


@given(st.integers(0, 2**31 - 1))
def test_limid_version_remembers_earlier_families(seed):
    m = random_influence_diagram(np.random.default_rng(seed))
    lv = make_limid_version(m)
    earlier = set()
    for d in m.decision_order:
        assert earlier <= set(lv.parents[d])
        earlier |= set(lv.parents[d]) | {d}
    ordering = find_solution_ordering(lv)
    reduced, _ = reduce_minimal(lv, ordering)
    assert is_soluble(reduced)


@given(st.integers(0, 2**31 - 1))
def test_greedy_ordering_search_agrees_with_trying_every_permutation(seed):
    m = random_limid(np.random.default_rng(seed), n_chance=4, n_decisions=3, n_value=2, density=0.5)
    exhaustive = any(is_exact_solution_ordering(m, o) for o in itertools.permutations(m.decisions))
    assert is_soluble(m) == exhaustive
