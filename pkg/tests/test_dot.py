import re

import pytest

from conftest import TREATMENT_HINT
from limid.document import emit_document, parse_document
from limid.dot import emit_dot
from limid.jtree import compile_limid, hint_from_labels
from limid.structure import make_limid_version, reduce_minimal


def _edges(text, arrow):
    return set(re.findall(rf'"(\w+)" {arrow} "(\w+)"', text))


def test_empty_model():
    assert emit_dot("limid", parse_document("")) == 'digraph "limid" {\n}\n'


def test_shapes(fig3):
    text = emit_dot("limid", fig3)
    assert '"d1" [shape=box];' in text
    assert '"r1" [shape=circle];' in text
    assert '"u1" [shape=diamond];' in text


def test_reduced_treatment_model_has_minimal_arcs(fig1, fig3):
    lv = make_limid_version(fig1)
    reduced, _ = reduce_minimal(lv, fig1.decision_order)
    text = emit_dot("limid", reduced)
    assert _edges(text, "->") == {(fig3.nodes[p].label, fig3.nodes[c].label) for p, c in fig3.arcs}


def test_graph_stages(fig3):
    tree = compile_limid(fig3, hint_from_labels(fig3, TREATMENT_HINT))
    moral = emit_dot("moral", tree, fig3)
    assert {frozenset(e) for e in _edges(moral, "--")} == tree.moral_graph.label_edges()
    tri = emit_dot("triangulated", tree, fig3)
    assert tri.count("style=dashed") == len(tree.triangulated.fill)
    jt = emit_dot("jtree", tree)
    assert jt.count(" -- ") == len(tree.edges) == 4
    assert 'C3 [label="r1, r4, d2, d4"];' in jt


def test_output_is_deterministic(fig1):
    a = emit_dot("limid", fig1)
    b = emit_dot("limid", parse_document(emit_document(fig1)))
    assert a == b
    t1, t2 = compile_limid(fig1), compile_limid(fig1)
    assert emit_dot("jtree", t1) == emit_dot("jtree", t2)


def test_bad_stage(fig1):
    with pytest.raises(ValueError):
        emit_dot("strong", fig1)
    with pytest.raises(TypeError):
        emit_dot("jtree", fig1)
