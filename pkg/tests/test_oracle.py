import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from limid.generate import random_limid
from limid.model import LimidBuilder, ModelError, total_utility, uniform_strategy
from limid.oracle import (
    OracleTooLarge,
    joint_mass,
    oracle_eu,
    oracle_global_max,
    pure_policies,
)


def bet_model():
    b = LimidBuilder("bet")
    b.chance("coin", ["h", "t"]).decision("bet", ["h", "t"]).value("win")
    b.arcs(("coin", "win"), ("bet", "win"))
    b.cpt("coin", [], [0.7, 0.3]).utility("win", ["coin", "bet"], [1, -1, -1, 1])
    return b.build()


def _eu_by_loop(limid, strategy):
    total = 0.0
    for cfg in itertools.product(*[range(limid.size(v)) for v in limid.variables]):
        x = dict(zip(limid.variables, cfg))
        total += joint_mass(limid, strategy, x) * total_utility(limid, x)
    return total


def test_bet_model_by_hand():
    m = bet_model()
    result = oracle_global_max(m)
    assert result.best_eu == pytest.approx(0.4)
    assert result.best_strategy[1].choice(()) == 0
    assert result.evaluations == 2
    assert oracle_eu(m, uniform_strategy(m)) == pytest.approx(0.0)


def test_coordination_optimum(coordination):
    result = oracle_global_max(coordination)
    assert result.best_eu == 1.0
    assert result.evaluations == 4
    # lexicographically first optimum is kept
    assert [p.choice(()) for _, p in sorted(result.best_strategy.items())] == [0, 0]


def test_joint_mass_checks_inputs():
    m = bet_model()
    with pytest.raises(ModelError):
        joint_mass(m, {}, {0: 0, 1: 0})
    with pytest.raises(ModelError):
        joint_mass(m, uniform_strategy(m), {0: 0})
    assert joint_mass(m, uniform_strategy(m), {0: 1, 1: 0}) == pytest.approx(0.15)


@given(st.integers(0, 2**31 - 1))
def test_vectorized_eu_matches_configuration_loop(seed):
    rng = np.random.default_rng(seed)
    m = random_limid(rng, n_chance=3, n_decisions=2, n_value=2)
    strategy = {d: next(iter(pure_policies(m, d))) for d in m.decisions}
    assert oracle_eu(m, strategy) == pytest.approx(_eu_by_loop(m, strategy), rel=1e-12, abs=1e-12)
    strategy = uniform_strategy(m)
    assert oracle_eu(m, strategy) == pytest.approx(_eu_by_loop(m, strategy), rel=1e-12, abs=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_global_max_matches_strategy_by_strategy_search(seed):
    m = random_limid(np.random.default_rng(seed), n_chance=3, n_decisions=2, n_value=2)
    decisions = sorted(m.decisions)
    best = -np.inf
    for combo in itertools.product(*[list(pure_policies(m, d)) for d in decisions]):
        best = max(best, oracle_eu(m, dict(zip(decisions, combo))))
    result = oracle_global_max(m)
    assert result.best_eu == pytest.approx(best, rel=1e-12, abs=1e-12)
    assert oracle_eu(m, result.best_strategy) == pytest.approx(result.best_eu, rel=1e-12, abs=1e-12)


def test_pure_policy_count(fig3):
    d4 = fig3.id_of("d4")
    pols = list(pure_policies(fig3, d4))
    assert len(pols) == 2**4
    assert all(p.is_pure() for p in pols)
    assert len({p.values.tobytes() for p in pols}) == 16


def test_caps(fig2, fig3):
    with pytest.raises(OracleTooLarge):
        oracle_global_max(fig2)
    with pytest.raises(OracleTooLarge):
        oracle_global_max(fig3, max_cells=10)


def _random_strategy(rng, m):
    from limid.model import Policy, canonical_family

    out = {}
    for d in m.decisions:
        fam = canonical_family(m, d)
        shape = tuple(m.size(v) for v in fam)
        rows = rng.dirichlet(np.ones(shape[-1]), size=int(np.prod(shape[:-1], dtype=int)))
        out[d] = Policy(fam, rows.reshape(shape), decision=d)
    return out


@given(st.integers(0, 2**31 - 1))
def test_global_max_dominates_random_strategies(seed):
    rng = np.random.default_rng(seed)
    m = random_limid(rng, n_chance=4, n_decisions=2, n_value=2)
    best = oracle_global_max(m).best_eu
    for _ in range(50):
        assert oracle_eu(m, _random_strategy(rng, m)) <= best + 1e-9


@given(st.integers(0, 2**31 - 1))
def test_relabelling_states_keeps_the_optimum(seed):
    from limid.model import Node, Table

    rng = np.random.default_rng(seed)
    m = random_limid(rng, n_chance=4, n_decisions=2, n_value=2, states=3, max_decision_parents=1)
    perms = {v: rng.permutation(m.size(v)) for v in m.variables}
    nodes = tuple(
        Node(n.id, n.label, n.kind, tuple(n.states[i] for i in perms[n.id])) if n.id in perms else n
        for n in m.nodes
    )
    tables = {}
    for k, t in m.tables.items():
        values = np.asarray(t.values)
        for axis, v in enumerate(t.vars):
            values = np.take(values, perms[v], axis=axis)
        tables[k] = Table(t.vars, values)
    shuffled = m.replace(nodes=nodes, tables=tables)
    assert oracle_global_max(shuffled).best_eu == pytest.approx(oracle_global_max(m).best_eu, rel=1e-12, abs=1e-12)
