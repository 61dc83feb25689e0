"""Exact evaluation of influence diagrams and limited-memory influence diagrams.

The pipeline is: validate the model, find an exact solution ordering,
drop non-requisite decision parents, compile a junction tree, and run
single policy updating with partial collects.  :mod:`limid.oracle` gives
brute-force ground truth for small models.
"""

from importlib import resources

from .document import DocumentError, emit_document, emit_strategy, parse_document, parse_strategy
from .dot import emit_dot
from .jtree import JunctionTree, compile_limid, hint_from_labels, moralize, triangulate
from .model import (
    Limid,
    LimidBuilder,
    ModelError,
    Node,
    NodeKind,
    Policy,
    Table,
    validate,
)
from .oracle import oracle_eu, oracle_global_max
from .potential import Potential, combine, contract, marginalize, potentials_equal
from .propagation import FlowLog, SolveReport, expected_utility, single_policy_updating
from .structure import (
    NotSoluble,
    d_separated,
    find_solution_ordering,
    is_soluble,
    make_limid_version,
    reduce_minimal,
    requisite_parents,
)

__version__ = "0.1.0"

FIXTURES = ("fig1", "fig2", "fig3", "coordination")


def fixture_text(name: str) -> str:
    """Text of a bundled example model (see :data:`FIXTURES`)."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return resources.files(__package__).joinpath("fixtures", f"{name}.limid").read_text("utf-8")


def load_fixture(name: str) -> Limid:
    return parse_document(fixture_text(name))


__all__ = [
    "DocumentError",
    "FIXTURES",
    "FlowLog",
    "JunctionTree",
    "Limid",
    "LimidBuilder",
    "ModelError",
    "Node",
    "NodeKind",
    "NotSoluble",
    "Policy",
    "Potential",
    "SolveReport",
    "Table",
    "combine",
    "compile_limid",
    "contract",
    "d_separated",
    "emit_document",
    "emit_dot",
    "emit_strategy",
    "expected_utility",
    "find_solution_ordering",
    "fixture_text",
    "hint_from_labels",
    "is_soluble",
    "load_fixture",
    "make_limid_version",
    "marginalize",
    "moralize",
    "oracle_eu",
    "oracle_global_max",
    "parse_document",
    "parse_strategy",
    "potentials_equal",
    "reduce_minimal",
    "requisite_parents",
    "single_policy_updating",
    "triangulate",
    "validate",
]
