"""Random models and potentials for tests, benchmarks and the CLI demo.

Every generator takes a :class:`numpy.random.Generator`, so instances are
reproducible from a seed.
"""

from __future__ import annotations

import numpy as np

from .model import Limid, LimidBuilder
from .potential import Potential
from .structure import is_soluble


def _random_dag_parents(rng: np.random.Generator, n: int, max_parents: int, density: float):
    """Parent lists over nodes 0..n-1 where parents always precede children."""
    parents = []
    for i in range(n):
        candidates = [j for j in range(i) if rng.random() < density]
        rng.shuffle(candidates)
        parents.append(sorted(candidates[:max_parents]))
    return parents


def random_dag(rng: np.random.Generator, n: int, density: float = 0.3, max_parents: int = 3):
    """Arc list of a random DAG on ``n`` nodes, returned with a random relabelling."""
    parents = _random_dag_parents(rng, n, max_parents, density)
    perm = rng.permutation(n)
    return [(int(perm[p]), int(perm[c])) for c, ps in enumerate(parents) for p in ps]


def _cpt_values(rng, n_rows: int, k: int, floor: float) -> np.ndarray:
    rows = rng.dirichlet(np.ones(k), size=n_rows)
    if floor > 0:
        rows = (rows + floor) / (1 + k * floor)
    return rows.reshape(-1)


def random_limid(
    rng: np.random.Generator,
    n_chance: int = 5,
    n_decisions: int = 2,
    n_value: int = 2,
    *,
    states: int = 2,
    max_parents: int = 2,
    max_decision_parents: int = 2,
    max_value_parents: int = 3,
    density: float = 0.5,
    positive_floor: float = 0.01,
    declare_order: bool = False,
    name: str = "random",
) -> Limid:
    """A random LIMID.

    Chance and decision nodes are placed in a random temporal sequence and
    draw their parents from earlier nodes.  Each value node gets between one
    and ``max_value_parents`` parents, always including one decision when
    there is one, so decisions matter.  CPT rows are Dirichlet draws mixed
    with ``positive_floor`` to keep every configuration reachable.
    With ``declare_order`` the decisions' temporal sequence becomes the
    declared order of an influence diagram.
    """
    kinds = ["c"] * n_chance + ["d"] * n_decisions
    rng.shuffle(kinds)
    labels = []
    counts = {"c": 0, "d": 0}
    for k in kinds:
        counts[k] += 1
        labels.append(f"{'r' if k == 'c' else 'd'}{counts[k]}")
    b = LimidBuilder(name)
    for lab, k in zip(labels, kinds):
        (b.chance if k == "c" else b.decision)(lab, states)
    values = [f"u{i + 1}" for i in range(n_value)]
    for lab in values:
        b.value(lab)

    parents: dict[str, list[str]] = {}
    for i, lab in enumerate(labels):
        limit = max_decision_parents if kinds[i] == "d" else max_parents
        cand = [labels[j] for j in range(i) if rng.random() < density]
        rng.shuffle(cand)
        parents[lab] = cand[:limit]
    decisions = [lab for lab, k in zip(labels, kinds) if k == "d"]
    for u in values:
        n_pa = int(rng.integers(1, max_value_parents + 1))
        chosen = list(rng.choice(labels, size=min(n_pa, len(labels)), replace=False)) if labels else []
        if decisions and not any(c in decisions for c in chosen):
            chosen[-1] = str(rng.choice(decisions))
        parents[u] = sorted(set(str(c) for c in chosen))

    for child, ps in parents.items():
        for p in ps:
            b.arc(p, child)
    for lab, k in zip(labels, kinds):
        if k == "c":
            n_rows = states ** len(parents[lab])
            b.cpt(lab, parents[lab], _cpt_values(rng, n_rows, states, positive_floor))
    for u in values:
        n_cells = states ** len(parents[u])
        b.utility(u, parents[u], np.round(rng.uniform(-10, 10, size=n_cells), 3))
    if declare_order:
        b.order(decisions)
    return b.build()


def random_soluble_limid(rng: np.random.Generator, max_tries: int = 1000, **kwargs) -> Limid:
    """Rejection-sample :func:`random_limid` until it has an exact solution ordering."""
    for _ in range(max_tries):
        m = random_limid(rng, **kwargs)
        if is_soluble(m):
            return m
    raise RuntimeError(f"no soluble LIMID found in {max_tries} draws")


def random_small_limid(rng: np.random.Generator, max_variables: int = 10, **kwargs) -> Limid:
    """Soluble LIMID with at most ``max_variables`` binary variables, at most
    three decisions and at most two parents per decision."""
    n_dec = int(rng.integers(1, 4))
    n_chance = int(rng.integers(1, max_variables - n_dec + 1))
    n_value = int(rng.integers(1, 4))
    return random_soluble_limid(
        rng, n_chance=n_chance, n_decisions=n_dec, n_value=n_value, max_decision_parents=2, **kwargs
    )


def random_influence_diagram(rng: np.random.Generator, max_nodes: int = 8) -> Limid:
    """Influence diagram with at most ``max_nodes`` nodes in total.

    Decisions appear in the declared order along the temporal sequence, so
    the no-forgetting arcs never create a cycle.
    """
    n_value = int(rng.integers(1, 3))
    n_dec = int(rng.integers(1, min(3, max_nodes - n_value - 1) + 1))
    n_chance = int(rng.integers(1, max_nodes - n_value - n_dec + 1))
    return random_limid(
        rng,
        n_chance=n_chance,
        n_decisions=n_dec,
        n_value=n_value,
        max_decision_parents=3,
        declare_order=True,
        name="random-id",
    )


def random_potential(
    rng: np.random.Generator,
    vars_,
    sizes: dict[int, int],
    zero_fraction: float = 0.0,
) -> Potential:
    """Random nonnegative probability part and real utility part.

    ``zero_fraction`` of the probability cells are set to exactly zero, to
    exercise the 0/0 convention of marginalization.
    """
    vars_ = tuple(sorted(vars_))
    shape = tuple(sizes[v] for v in vars_)
    prob = rng.uniform(0.05, 2.0, size=shape)
    if zero_fraction > 0:
        prob = np.where(rng.random(shape) < zero_fraction, 0.0, prob)
    util = rng.uniform(-10, 10, size=shape)
    return Potential(vars_, prob, util)
