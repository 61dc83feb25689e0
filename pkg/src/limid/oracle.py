"""Brute-force ground truth for small models.

Nothing here touches potentials or junction trees: the joint distribution
and total utility are materialized over every configuration of the model
variables and strategies are enumerated one by one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import Limid, ModelError, Policy, Table, pure_policy

DEFAULT_MAX_CELLS = 2**22
DEFAULT_MAX_STRATEGIES = 2**20


class OracleTooLarge(RuntimeError):
    """Instance too large for exhaustive evaluation."""


@dataclass
class OracleResult:
    best_eu: float
    best_strategy: dict[int, Policy]
    evaluations: int


def _check_strategy(limid: Limid, strategy: Mapping[int, Policy]) -> None:
    missing = [d for d in limid.decisions if d not in strategy]
    if missing:
        raise ModelError(f"strategy has no policy for {limid.labels(missing)}")


def joint_mass(limid: Limid, strategy: Mapping[int, Policy], x: Mapping[int, int]) -> float:
    """Product of every CPT and policy entry at configuration ``x``."""
    _check_strategy(limid, strategy)
    missing = [v for v in limid.variables if v not in x]
    if missing:
        raise ModelError(f"configuration is missing {limid.labels(missing)}")
    mass = 1.0
    for r in limid.chance_nodes:
        t = limid.tables[r]
        mass *= float(t.values[tuple(x[v] for v in t.vars)])
    for d in limid.decisions:
        t = strategy[d]
        mass *= float(t.values[tuple(x[v] for v in t.vars)])
    return mass


def _state_shape(limid: Limid) -> tuple[int, ...]:
    return tuple(limid.size(v) for v in limid.variables)


def _check_cells(limid: Limid, max_cells: int) -> None:
    cells = int(np.prod(_state_shape(limid), dtype=object))
    if cells > max_cells:
        raise OracleTooLarge(f"state space has {cells} cells (cap {max_cells})")


def _full(limid: Limid, table: Table) -> np.ndarray:
    """Broadcast a table to the full state space (axes = limid.variables)."""
    axes = list(limid.variables)
    pos = [axes.index(v) for v in table.vars]
    order = sorted(range(len(pos)), key=lambda i: pos[i])
    arr = np.transpose(table.values, order)
    shape = [1] * len(axes)
    for i in order:
        shape[pos[i]] = limid.size(table.vars[i])
    return arr.reshape(shape)


def joint_tables(
    limid: Limid, strategy: Mapping[int, Policy] | None = None, max_cells: int = DEFAULT_MAX_CELLS
) -> tuple[np.ndarray, np.ndarray]:
    """(f_q, U) over the full state space; decisions without a policy are left out of f."""
    _check_cells(limid, max_cells)
    shape = _state_shape(limid)
    f = np.ones(shape)
    for r in limid.chance_nodes:
        f = f * _full(limid, limid.tables[r])
    for d, pol in (strategy or {}).items():
        f = f * _full(limid, pol)
    utility = np.zeros(shape)
    for u in limid.value_nodes:
        utility = utility + _full(limid, limid.tables[u])
    return f, utility


def oracle_eu(
    limid: Limid, strategy: Mapping[int, Policy], max_cells: int = DEFAULT_MAX_CELLS
) -> float:
    """Sum over all configurations of f_q(x) U(x)."""
    _check_strategy(limid, strategy)
    f, utility = joint_tables(limid, {d: strategy[d] for d in limid.decisions}, max_cells)
    return float(np.sum(f * utility))


def pure_policies(limid: Limid, d: int):
    """Every degenerate policy for ``d``, lexicographic over (parent configuration, alternative)."""
    n_rows = int(np.prod([limid.size(p) for p in limid.parents[d]], dtype=int))
    for choices in itertools.product(range(limid.size(d)), repeat=n_rows):
        yield pure_policy(limid, d, choices)


def oracle_global_max(
    limid: Limid,
    max_cells: int = DEFAULT_MAX_CELLS,
    max_strategies: int = DEFAULT_MAX_STRATEGIES,
) -> OracleResult:
    """Best pure strategy by exhaustive enumeration (solubility not required).

    Pure strategies suffice: EU is affine in each policy separately, so some
    vertex of the strategy polytope attains the maximum.
    """
    _check_cells(limid, max_cells)
    decisions = sorted(limid.decisions)
    count = 1
    for d in decisions:
        n_rows = int(np.prod([limid.size(p) for p in limid.parents[d]], dtype=object))
        count *= limid.size(d) ** n_rows
        if count > max_strategies:
            raise OracleTooLarge(f"more than {max_strategies} pure strategies")

    f, utility = joint_tables(limid, None, max_cells)
    weighted = (f * utility).reshape(-1)
    options = [list(pure_policies(limid, d)) for d in decisions]
    masks = [[_full(limid, p) for p in opts] for opts in options]
    shape = _state_shape(limid)

    best_eu = -np.inf
    best: tuple[int, ...] | None = None
    evaluations = 0
    for combo in itertools.product(*[range(len(o)) for o in options]):
        indicator = np.ones(shape)
        for k, i in enumerate(combo):
            indicator = indicator * masks[k][i]
        eu = float(weighted @ indicator.reshape(-1))
        evaluations += 1
        if eu > best_eu:
            best_eu, best = eu, combo
    strategy = {d: options[k][best[k]] for k, d in enumerate(decisions)}
    return OracleResult(float(best_eu), strategy, evaluations)
