"""Mailbox message passing and the single policy updating driver.

Invariant kept by :func:`collect` and :func:`partial_collect`: every filled
mailbox holds a message that is valid for the current clique potentials.
After a collect to ``R`` all filled messages point towards ``R``, so
multiplying a policy into ``R`` never leaves a stale message behind.
Missing messages are computed on demand, which is what lets messages
skipped by the separator test be supplied later if some other root needs
them.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .jtree import JunctionTree, compile_limid
from .model import (
    Limid,
    ModelError,
    Policy,
    canonical_family,
    family,
    validate,
    validate_policy,
)
from .potential import (
    Potential,
    combine,
    contract,
    from_prob_table,
    marginalize,
    multiply_prob,
    potentials_equal,
)
from .structure import (
    ReductionTrace,
    convert_to_chance,
    find_solution_ordering,
    make_limid_version,
    reduce_minimal,
)

log = logging.getLogger(__name__)

FULL = "full-collect"
PARTIAL = "partial-collect"
SKIPPED = "skipped-by-theorem5"
REASONS = (FULL, PARTIAL, SKIPPED)

# relative tolerance under which two alternatives count as tied
TIE_RTOL = 1e-9


class PropagationError(RuntimeError):
    pass


class MissingMessage(PropagationError):
    pass


class InvalidModel(ValueError):
    def __init__(self, report):
        super().__init__(str(report))
        self.report = report


@dataclass(frozen=True)
class Message:
    source: int
    target: int
    payload: Potential


@dataclass(frozen=True)
class Flow:
    seq: int
    source: int
    target: int
    reason: str


@dataclass
class FlowLog:
    """Append-only record of messages sent (and skipped)."""

    entries: list[Flow] = field(default_factory=list)

    def append(self, source: int, target: int, reason: str) -> None:
        if reason not in REASONS:
            raise ValueError(f"unknown flow reason {reason!r}")
        self.entries.append(Flow(len(self.entries) + 1, source, target, reason))

    @property
    def sent(self) -> int:
        return sum(1 for e in self.entries if e.reason != SKIPPED)

    @property
    def skipped(self) -> int:
        return sum(1 for e in self.entries if e.reason == SKIPPED)

    def __len__(self):
        return len(self.entries)

    def to_text(self) -> str:
        return "".join(f"{e.seq} {e.source} {e.target} {e.reason}\n" for e in self.entries)

    @classmethod
    def from_text(cls, text: str) -> "FlowLog":
        out = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4 or parts[3] not in REASONS:
                raise ValueError(f"line {lineno}: expected 'seq from to reason'")
            seq, src, dst = (int(p) for p in parts[:3])
            if seq != len(out.entries) + 1:
                raise ValueError(f"line {lineno}: sequence number {seq} out of order")
            out.append(src, dst, parts[3])
        return out


# ---------------------------------------------------------------------------
# Messages


def _require_initialized(tree: JunctionTree) -> None:
    if tree.potentials is None:
        raise PropagationError("junction tree is not initialized")


def send_message(
    tree: JunctionTree, source: int, target: int, flows: FlowLog | None = None, reason: str = FULL
) -> Message:
    """Combine ``source``'s potential with its other incoming messages and
    marginalize onto the separator; the result goes into the mailbox."""
    _require_initialized(tree)
    if target not in tree.neighbors[source]:
        raise PropagationError(f"cliques {source} and {target} are not adjacent")
    pot = tree.potentials[source]
    for n in tree.neighbors[source]:
        if n == target:
            continue
        incoming = tree.mailboxes[(n, source)]
        if incoming is None:
            raise MissingMessage(f"clique {source} has no message from {n}")
        pot = combine(pot, incoming)
    payload = marginalize(pot, tree.separator(source, target))
    tree.mailboxes[(source, target)] = payload
    if flows is not None:
        flows.append(source, target, reason)
    return Message(source, target, payload)


def _ensure(tree: JunctionTree, source: int, target: int, flows, reason) -> None:
    """Fill mailbox source->target, computing missing upstream messages first."""
    if tree.mailboxes[(source, target)] is not None:
        return
    # iterative post-order over the subtree hanging off source
    stack = [(source, target, False)]
    while stack:
        src, dst, expanded = stack.pop()
        if tree.mailboxes[(src, dst)] is not None:
            continue
        if expanded:
            send_message(tree, src, dst, flows, reason)
            continue
        stack.append((src, dst, True))
        for n in reversed(tree.neighbors[src]):
            if n != dst and tree.mailboxes[(n, src)] is None:
                stack.append((n, src, False))


def root_belief(tree: JunctionTree, root: int, exclude: Iterable[int] = ()) -> Potential:
    """pi_R combined with the messages from all neighbours not in ``exclude``."""
    _require_initialized(tree)
    exclude = set(exclude)
    pot = tree.potentials[root]
    for n in tree.neighbors[root]:
        if n in exclude:
            continue
        incoming = tree.mailboxes[(n, root)]
        if incoming is None:
            raise MissingMessage(f"root {root} has no message from {n}")
        pot = combine(pot, incoming)
    return pot


def _gather(tree, root, flows, skip, reason) -> Potential:
    skip = set(skip)
    for n in tree.neighbors[root]:
        if n in skip:
            if tree.mailboxes[(n, root)] is None and flows is not None:
                flows.append(n, root, SKIPPED)
            continue
        _ensure(tree, n, root, flows, reason)
    tree.root = root
    return root_belief(tree, root, exclude=skip)


def collect(
    tree: JunctionTree,
    root: int,
    flows: FlowLog | None = None,
    skip: Iterable[int] = (),
) -> Potential:
    """Pass messages leaf-to-root towards ``root`` and return its belief.

    Neighbours in ``skip`` are neither asked for a message nor included in
    the returned potential.
    """
    _require_initialized(tree)
    if not 0 <= root < len(tree.cliques):
        raise PropagationError(f"unknown clique {root}")
    return _gather(tree, root, flows, skip, FULL)


def partial_collect(
    tree: JunctionTree,
    old_root: int,
    new_root: int,
    flows: FlowLog | None = None,
    skip: Iterable[int] = (),
) -> Potential:
    """Empty the mailboxes on the old_root..new_root path, then collect
    to ``new_root`` again; only the emptied messages need recomputing."""
    _require_initialized(tree)
    if tree.root is None:
        raise PropagationError("partial collect requires a prior collect")
    if tree.root != old_root:
        raise PropagationError(f"last collect went to clique {tree.root}, not {old_root}")
    path = tree.path(old_root, new_root)
    for a, b in zip(path, path[1:]):
        tree.mailboxes[(a, b)] = None
        tree.mailboxes[(b, a)] = None
    return _gather(tree, new_root, flows, skip, PARTIAL)


# ---------------------------------------------------------------------------
# Policies


def _argmax_rows(values: np.ndarray) -> np.ndarray:
    """First index within ``TIE_RTOL`` of the row maximum, per row of the last axis."""
    rows = values.reshape(-1, values.shape[-1])
    top = rows.max(axis=1, keepdims=True)
    scale = np.abs(rows).max(axis=1, keepdims=True)
    near = rows >= top - TIE_RTOL * scale
    return np.argmax(near, axis=1)


def policy_from_contraction(limid: Limid, d: int, vars_: Sequence[int], c: np.ndarray) -> Policy:
    """Degenerate policy at the row-wise argmax of ``c`` (over sorted ``vars_``)."""
    target = canonical_family(limid, d)
    c = np.transpose(c, [list(vars_).index(v) for v in target])
    choice = _argmax_rows(c)
    values = np.zeros((choice.size, c.shape[-1]))
    values[np.arange(choice.size), choice] = 1.0
    return Policy(target, values.reshape(c.shape), decision=d)


def extract_policy(
    tree: JunctionTree,
    limid: Limid,
    d: int,
    root: int,
    belief: Potential | None = None,
) -> Policy:
    """Optimum policy for an extremal decision from the root's belief.

    The belief is marginalized onto fa(d) and contracted; each parent
    configuration gets the alternative with the largest contraction, the
    lowest index winning ties and all-zero rows.
    """
    fa = family(limid, d)
    if not fa <= set(tree.cliques[root]):
        raise PropagationError(f"clique {root} does not contain fa({limid.nodes[d].label})")
    if belief is None:
        belief = root_belief(tree, root)
    local = marginalize(belief, fa)
    return policy_from_contraction(limid, d, local.vars, contract(local))


def install_policy(
    tree: JunctionTree, limid: Limid, d: int, policy: Policy, root: int | None = None
) -> tuple[JunctionTree, Limid]:
    """Multiply the policy into a clique holding fa(d) (default: the current
    root) and convert ``d`` to a chance node in the model.

    ``tree`` is updated in place and returned for convenience.
    """
    report = validate_policy(limid, policy)
    if not report.ok:
        raise ModelError(f"invalid policy: {report}")
    if root is None:
        root = tree.root
    if root is None or not family(limid, d) <= set(tree.cliques[root]):
        hosts = tree.containing(family(limid, d))
        if not hosts:
            raise PropagationError(f"no clique contains fa({limid.nodes[d].label})")
        root = hosts[0]
    tree.potentials[root] = multiply_prob(tree.potentials[root], from_prob_table(policy))
    return tree, convert_to_chance(limid, d, policy)


def theorem5_skippable(tree: JunctionTree, edge: tuple[int, int], limid: Limid, d: int) -> bool:
    """Whether the message C -> R can be left out when computing d's policy:
    true iff the separator lies within pa(d)."""
    c, r = edge
    if r not in tree.neighbors[c]:
        raise PropagationError(f"cliques {c} and {r} are not adjacent")
    return set(tree.separator(c, r)) <= set(limid.parents[d])


def select_root(tree: JunctionTree, fa: Iterable[int], previous: int | None) -> int:
    """Clique containing ``fa`` nearest to ``previous``; lowest index on ties."""
    hosts = tree.containing(fa)
    if not hosts:
        raise PropagationError("no clique contains the decision's family")
    if previous is None:
        return hosts[0]
    return min(hosts, key=lambda c: (tree.distance(previous, c), c))


# ---------------------------------------------------------------------------
# Driver


@dataclass
class SolveReport:
    strategy: dict[int, Policy]
    expected_utility: float
    flows: FlowLog
    ordering: tuple[int, ...]
    reduction: ReductionTrace
    limid: Limid  # the model that was compiled (LIMID version, reduced if requested)
    tree: JunctionTree
    roots: list[tuple[int, int]] = field(default_factory=list)  # (decision, clique)
    partial_checks: list[tuple[int, bool]] = field(default_factory=list)

    @property
    def messages_sent(self) -> int:
        return self.flows.sent

    def choices(self) -> dict[str, dict[tuple[str, ...], str]]:
        """Readable strategy: decision label -> parent states -> chosen state."""
        out = {}
        for d, pol in sorted(self.strategy.items()):
            nodes = self.limid.nodes
            parent_states = [nodes[p].states for p in pol.parents]
            rows = {}
            for combo in itertools.product(*[range(len(s)) for s in parent_states]):
                key = tuple(parent_states[i][j] for i, j in enumerate(combo))
                rows[key] = nodes[d].states[pol.choice(combo)]
            out[nodes[d].label] = rows
        return out


def _check_partial(tree: JunctionTree, root: int, skip, belief: Potential) -> bool:
    fresh = tree.copy()
    fresh.clear_mailboxes()
    reference = collect(fresh, root, skip=skip)
    return potentials_equal(belief, reference)


def prepare(limid: Limid) -> tuple[Limid, tuple[int, ...] | None]:
    """Validate; turn an influence diagram into its LIMID version."""
    report = validate(limid)
    if not report.ok:
        raise InvalidModel(report)
    if limid.decision_order is not None:
        return make_limid_version(limid), limid.decision_order
    return limid, None


def single_policy_updating(
    limid: Limid,
    *,
    reduce: bool = True,
    theorem5: bool = True,
    elimination_order: Sequence[int] | None = None,
    verify_partial: bool = False,
) -> SolveReport:
    """Globally optimal strategy for a soluble LIMID (or any influence diagram).

    Pipeline: solution ordering, minimal reduction, compilation, a full
    collect to a clique holding fa(d_k), then for each decision from d_k
    down to d_1 an optimum policy is extracted and multiplied into the root,
    with a partial collect moving to the next root.  The expected utility
    is read off the final root marginalized onto the empty set.

    Raises :class:`~limid.structure.NotSoluble` for LIMIDs without an exact
    solution ordering and :class:`InvalidModel` for malformed input.
    """
    model, declared = prepare(limid)
    ordering = find_solution_ordering(model, prefer=declared)
    trace = ReductionTrace()
    if reduce:
        model, trace = reduce_minimal(model, ordering)
    tree = compile_limid(model, elimination_order)
    flows = FlowLog()
    current = model
    strategy: dict[int, Policy] = {}
    roots: list[tuple[int, int]] = []
    checks: list[tuple[int, bool]] = []
    previous: int | None = None

    for d in reversed(ordering):
        fa = family(current, d)
        root = select_root(tree, fa, previous)
        skip = (
            {c for c in tree.neighbors[root] if theorem5_skippable(tree, (c, root), current, d)}
            if theorem5
            else set()
        )
        if previous is None:
            belief = collect(tree, root, flows, skip)
        else:
            belief = partial_collect(tree, previous, root, flows, skip)
        if verify_partial:
            checks.append((d, _check_partial(tree, root, skip, belief)))
        policy = extract_policy(tree, current, d, root, belief)
        tree, current = install_policy(tree, current, d, policy, root)
        strategy[d] = policy
        roots.append((d, root))
        previous = root
        log.debug("decision %s solved at clique %d", current.nodes[d].label, root)

    eu = _final_expected_utility(tree, previous, flows)
    return SolveReport(
        strategy=strategy,
        expected_utility=eu,
        flows=flows,
        ordering=tuple(ordering),
        reduction=trace,
        limid=model,
        tree=tree,
        roots=roots,
        partial_checks=checks,
    )


def _final_expected_utility(tree: JunctionTree, root: int | None, flows: FlowLog | None) -> float:
    if not tree.cliques:
        return 0.0
    if root is None:
        belief = collect(tree, 0, flows)
    else:
        belief = _gather(tree, root, flows, (), PARTIAL)
    total = marginalize(belief, ())
    mass = float(total.prob)
    if abs(mass - 1.0) > 1e-9:
        raise PropagationError(f"joint probability mass is {mass!r}, expected 1")
    return float(total.util)


def expected_utility(limid: Limid, strategy: dict[int, Policy]) -> float:
    """EU of a strategy via the junction tree of the fully converted model."""
    missing = [d for d in limid.decisions if d not in strategy]
    if missing:
        raise ModelError(f"strategy has no policy for {limid.labels(missing)}")
    model = limid.replace(decision_order=None)
    for d in limid.decisions:
        model = convert_to_chance(model, d, strategy[d])
    tree = compile_limid(model)
    return _final_expected_utility(tree, None, None)
