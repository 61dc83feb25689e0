"""Two-part potentials: a probability table paired with a utility table.

Variables are kept in ascending id order so that any two potentials over
overlapping sets broadcast against each other by inserting singleton axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .model import Table

# masses below this are treated as exact zeros when dividing
TINY_MASS = 1e-300
EQUALITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Potential:
    vars: tuple[int, ...]
    prob: np.ndarray
    util: np.ndarray

    def __post_init__(self):
        vars_ = tuple(int(v) for v in self.vars)
        if list(vars_) != sorted(set(vars_)):
            raise ValueError(f"potential variables must be strictly ascending: {vars_}")
        prob = np.asarray(self.prob, dtype=float)
        util = np.asarray(self.util, dtype=float)
        if prob.shape != util.shape or prob.ndim != len(vars_):
            raise ValueError("probability and utility parts must share the variable shape")
        object.__setattr__(self, "vars", vars_)
        object.__setattr__(self, "prob", prob)
        object.__setattr__(self, "util", util)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.prob.shape

    @property
    def sizes(self) -> dict[int, int]:
        return dict(zip(self.vars, self.prob.shape))

    def __repr__(self):
        return f"Potential(vars={self.vars}, shape={self.shape})"


def vacuous(vars: Iterable[int] = (), sizes: Mapping[int, int] | None = None) -> Potential:
    """Unity probability part, zero utility part."""
    vars_ = tuple(sorted(set(vars)))
    shape = tuple(sizes[v] for v in vars_) if vars_ else ()
    return Potential(vars_, np.ones(shape), np.zeros(shape))


def from_prob_table(table: Table) -> Potential:
    vars_, values = _sorted_axes(table.vars, table.values)
    return Potential(vars_, values, np.zeros_like(values))


def from_util_table(table: Table) -> Potential:
    vars_, values = _sorted_axes(table.vars, table.values)
    return Potential(vars_, np.ones_like(values), values)


def _sorted_axes(vars_, values):
    order = sorted(range(len(vars_)), key=lambda i: vars_[i])
    return tuple(vars_[i] for i in order), np.transpose(np.asarray(values, float), order)


def _lift(arr: np.ndarray, vars_: tuple[int, ...], target: tuple[int, ...]) -> np.ndarray:
    """Reshape ``arr`` (over sorted ``vars_``) to broadcast over sorted ``target``."""
    sizes = dict(zip(vars_, arr.shape))
    return arr.reshape(tuple(sizes.get(v, 1) for v in target))


def combine(a: Potential, b: Potential) -> Potential:
    """(p1 * p2, u1 + u2) on the union of the variable sets."""
    sa, sb = a.sizes, b.sizes
    for v in sa.keys() & sb.keys():
        if sa[v] != sb[v]:
            raise ValueError(f"variable {v} has domain size {sa[v]} and {sb[v]}")
    union = tuple(sorted(sa.keys() | sb.keys()))
    shape = tuple(sa.get(v) or sb[v] for v in union)
    pa, pb = _lift(a.prob, a.vars, union), _lift(b.prob, b.vars, union)
    ua, ub = _lift(a.util, a.vars, union), _lift(b.util, b.vars, union)
    prob = np.broadcast_to(pa * pb, shape)
    util = np.broadcast_to(ua + ub, shape)
    return Potential(union, np.array(prob), np.array(util))


def combine_all(potentials: Iterable[Potential]) -> Potential:
    result = vacuous()
    for p in potentials:
        result = combine(result, p)
    return result


def marginalize(pot: Potential, keep: Iterable[int]) -> Potential:
    """Sum out everything outside ``keep``; utilities become mass-weighted averages.

    Cells with (numerically) zero mass get utility 0.
    """
    keep = frozenset(keep)
    if not keep <= set(pot.vars):
        raise ValueError(f"cannot marginalize onto {sorted(keep)}: not a subset of {pot.vars}")
    axes = tuple(i for i, v in enumerate(pot.vars) if v not in keep)
    if not axes:
        return pot
    prob = pot.prob.sum(axis=axes)
    weighted = (pot.prob * pot.util).sum(axis=axes)
    prob = np.asarray(prob, dtype=float)
    weighted = np.asarray(weighted, dtype=float)
    util = np.zeros_like(prob)
    mask = prob > TINY_MASS
    np.divide(weighted, prob, out=util, where=mask)
    return Potential(tuple(v for v in pot.vars if v in keep), prob, util)


def contract(pot: Potential) -> np.ndarray:
    """Pointwise product p * u."""
    return pot.prob * pot.util


def multiply_prob(pot: Potential, table: Potential) -> Potential:
    """Multiply ``table``'s probability part into ``pot`` (``table.vars`` must be covered)."""
    if not set(table.vars) <= set(pot.vars):
        raise ValueError("table variables must be contained in the potential")
    prob = pot.prob * _lift(table.prob, table.vars, pot.vars)
    return Potential(pot.vars, prob, pot.util)


def potentials_equal(a: Potential, b: Potential, tol: float = EQUALITY_TOL) -> bool:
    """Equal probability parts, and equal utility parts wherever ``a`` has mass.

    Cells are compared as ``|x - y| <= tol * max(1, |x|, |y|)``.
    """
    if a.vars != b.vars:
        raise ValueError(f"potentials are over different variables: {a.vars} vs {b.vars}")
    if a.shape != b.shape:
        return False

    def close(x, y):
        scale = np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
        return np.abs(x - y) <= tol * scale

    if not np.all(close(a.prob, b.prob)):
        return False
    support = a.prob > 0
    return bool(np.all(close(a.util, b.util)[support]))
