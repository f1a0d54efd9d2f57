import pytest
from hypothesis import given

from cpsarch.flowgraph import FlowGraph, build_flow_graph, emit_dot, emit_json, graph_to_dict, load_json
from cpsarch.ingest import load_model
from cpsarch.metrics import analyze
from cpsarch.model import Block, Connection, Model

from conftest import FIXTURES, MODEL_FIXTURES, expected
from test_metrics import models

FILTERS = {
    "unfiltered": {},
    "relevant_only": {"relevant_only": True},
    "exclude_ports": {"exclude_ports": True},
    "relevant_only_exclude_ports": {"relevant_only": True, "exclude_ports": True},
}


def sidecar_cases():
    for name in MODEL_FIXTURES:
        for key, want in expected(name).get("flowgraph", {}).items():
            yield pytest.param(name, key, want, id=f"{name}-{key}")


@pytest.mark.parametrize("name, key, want", list(sidecar_cases()))
def test_fixture_graphs_match_hand_construction(table, name, key, want):
    g = build_flow_graph(load_model(FIXTURES / f"{name}.json"), table, **FILTERS[key])
    assert sorted(g.nodes) == want["nodes"]
    assert sorted([s, d, w] for (s, d), w in g.edges.items()) == sorted(want["edges"])


@pytest.mark.parametrize("name", MODEL_FIXTURES)
def test_unfiltered_weight_equals_total_cc(table, name):
    m = load_model(FIXTURES / f"{name}.json")
    assert build_flow_graph(m, table).total_weight() == analyze(m, table).total_cc
    assert build_flow_graph(m, table, relevant_only=True).total_weight() == analyze(m, table).relevant_cc


def test_parallel_connections_aggregate(table):
    m = Model(
        "m",
        (Block("a", "A", "Gain"), Block("b", "B", "Gain"), Block("c", "C", "Sum")),
        (Connection("a", 0, "c", 0), Connection("b", 0, "c", 1), Connection("a", 0, "b", 0)),
    )
    g = build_flow_graph(m, table)
    assert g.edges == {("Gain", "Sum"): 2, ("Gain", "Gain"): 1}
    assert g.out_weight("Gain") == 3


def test_dot_output_shape(table):
    g = build_flow_graph(load_model(FIXTURES / "nested6.json"), table)
    text = emit_dot(g).decode()
    lines = text.splitlines()
    assert lines[0] == "digraph {" and lines[-1] == "}"
    assert '  "Constant" -> "Gain" [weight=1, penwidth=1.0, label="1"];' in lines
    assert emit_dot(g, penwidth_per_unit=2.5).decode().count("penwidth=2.5") == len(g.edges)


def test_empty_graph_dot(table):
    assert emit_dot(build_flow_graph(Model("e"), table)) == b"digraph {\n}\n"


def test_dot_escapes_quotes():
    assert b'"a\\"b"' in emit_dot(FlowGraph(frozenset({'a"b'})))


@pytest.mark.parametrize("name", MODEL_FIXTURES)
def test_json_round_trip(table, name):
    g = build_flow_graph(load_model(FIXTURES / f"{name}.json"), table, exclude_ports=True)
    assert load_json(emit_json(g)) == g
    assert graph_to_dict(load_json(emit_json(g))) == graph_to_dict(g)


def _edge_le(small, big):
    return all(w <= big.edges.get(k, 0) for k, w in small.edges.items())


@given(models())
def test_conservation_and_filter_monotonicity(table, m):
    full = build_flow_graph(m, table)
    assert full.total_weight() == len(m.connections)
    assert full.nodes == {b.block_type for b in m.blocks}
    rel = build_flow_graph(m, table, relevant_only=True)
    nop = build_flow_graph(m, table, exclude_ports=True)
    both = build_flow_graph(m, table, relevant_only=True, exclude_ports=True)
    for g in (rel, nop, both):
        assert g.total_weight() <= full.total_weight() and g.nodes <= full.nodes and _edge_le(g, full)
    assert both.total_weight() <= min(rel.total_weight(), nop.total_weight())
    assert _edge_le(both, rel) and _edge_le(both, nop)
