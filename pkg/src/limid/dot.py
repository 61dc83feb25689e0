"""Graphviz DOT text for models, moral/triangulated graphs and junction trees.

Output is deterministic: nodes are listed by id and edges sorted, so the
same input always yields byte-identical text.
"""

from __future__ import annotations

from .jtree import JunctionTree, UGraph
from .model import Limid, NodeKind

STAGES = ("limid", "moral", "triangulated", "jtree")

_SHAPES = {
    NodeKind.CHANCE: "circle",
    NodeKind.DECISION: "box",
    NodeKind.VALUE: "diamond",
}


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def limid_dot(limid: Limid) -> str:
    name = limid.name or "limid"
    out = [f"digraph {_quote(name)} {{"]
    for node in limid.nodes:
        out.append(f"  {_quote(node.label)} [shape={_SHAPES[node.kind]}];")
    for p, c in sorted(limid.arcs):
        out.append(f"  {_quote(limid.nodes[p].label)} -> {_quote(limid.nodes[c].label)};")
    out.append("}")
    return "\n".join(out) + "\n"


def ugraph_dot(graph: UGraph, name: str = "graph", limid: Limid | None = None) -> str:
    """Undirected graph; fill-in edges are drawn dashed."""
    out = [f"graph {_quote(name)} {{"]
    for v in sorted(graph.nodes):
        label = graph.labels.get(v, str(v))
        shape = _SHAPES[limid.kind(v)] if limid is not None else "circle"
        out.append(f"  {_quote(label)} [shape={shape}];")
    for a, b in sorted(tuple(sorted(e)) for e in graph.edges):
        style = " [style=dashed]" if frozenset((a, b)) in graph.fill else ""
        la, lb = graph.labels.get(a, str(a)), graph.labels.get(b, str(b))
        out.append(f"  {_quote(la)} -- {_quote(lb)}{style};")
    out.append("}")
    return "\n".join(out) + "\n"


def jtree_dot(tree: JunctionTree, name: str = "jtree") -> str:
    """Cliques as boxes labelled with their variables; edges labelled with separators."""

    def names(vars_):
        return ", ".join(tree.labels.get(v, str(v)) for v in vars_)

    out = [f"graph {_quote(name)} {{", "  node [shape=box];"]
    for i, clique in enumerate(tree.cliques):
        out.append(f"  C{i} [label={_quote(names(clique))}];")
    for a, b in tree.edges:
        out.append(f"  C{a} -- C{b} [label={_quote(names(tree.separator(a, b)))}];")
    out.append("}")
    return "\n".join(out) + "\n"


def emit_dot(stage: str, model: Limid | JunctionTree | UGraph, limid: Limid | None = None) -> str:
    """DOT text for one pipeline stage.

    ``model`` is a :class:`Limid` for ``limid``, a :class:`UGraph` for
    ``moral``/``triangulated`` (a :class:`JunctionTree` also works, using
    the graphs recorded during its compilation) and a :class:`JunctionTree`
    for ``jtree``.
    """
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
    if stage == "limid":
        if not isinstance(model, Limid):
            raise TypeError("stage 'limid' needs a Limid")
        return limid_dot(model)
    if stage == "jtree":
        if not isinstance(model, JunctionTree):
            raise TypeError("stage 'jtree' needs a JunctionTree")
        return jtree_dot(model)
    graph = model
    if isinstance(model, JunctionTree):
        graph = model.moral_graph if stage == "moral" else model.triangulated
    if not isinstance(graph, UGraph):
        raise TypeError(f"stage {stage!r} needs an undirected graph")
    return ugraph_dot(graph, stage, limid)
