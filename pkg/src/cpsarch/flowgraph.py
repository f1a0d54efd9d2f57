"""Type-level flow graphs: nodes are block types, edge weights count connections."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .catalog import CatalogTable, is_relevant
from .model import Model

PORT_TYPES = frozenset({"Inport", "Outport"})


@dataclass(frozen=True)
class FlowGraph:
    nodes: frozenset[str] = frozenset()
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    excluded_types: frozenset[str] = frozenset()

    def total_weight(self) -> int:
        return sum(self.edges.values())

    def out_weight(self, block_type: str) -> int:
        return sum(w for (s, _), w in self.edges.items() if s == block_type)


def build_flow_graph(
    model: Model,
    table: CatalogTable,
    relevant_only: bool = False,
    exclude_ports: bool = False,
) -> FlowGraph:
    """Aggregate a model's connections by (source type, destination type).

    ``exclude_ports`` drops Inport/Outport blocks and every connection that
    touches one. ``relevant_only`` keeps connections with at least one
    relevant endpoint; irrelevant blocks then survive only as endpoints of a
    kept connection.
    """
    excluded = PORT_TYPES if exclude_ports else frozenset()
    types = {b.id: b.block_type for b in model.blocks}
    kept = [
        c
        for c in model.connections
        if types[c.src_block] not in excluded and types[c.dst_block] not in excluded
    ]
    if relevant_only:
        kept = [c for c in kept if is_relevant(types[c.src_block], table) or is_relevant(types[c.dst_block], table)]

    nodes = set()
    for b in model.blocks:
        if b.block_type in excluded:
            continue
        if relevant_only and not is_relevant(b.block_type, table):
            continue
        nodes.add(b.block_type)
    edges = Counter((types[c.src_block], types[c.dst_block]) for c in kept)
    for s, d in edges:
        nodes.update((s, d))
    return FlowGraph(frozenset(nodes), dict(edges), frozenset(excluded))


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_dot(graph: FlowGraph, penwidth_per_unit: float = 1.0) -> bytes:
    """Render as a Graphviz digraph; ``penwidth`` grows linearly with weight, floor 1.0."""
    lines = ["digraph {"]
    for node in sorted(graph.nodes):
        lines.append(f"  {_dot_id(node)};")
    for (s, d), w in sorted(graph.edges.items()):
        width = max(1.0, w * penwidth_per_unit)
        lines.append(f'  {_dot_id(s)} -> {_dot_id(d)} [weight={w}, penwidth={width:.1f}, label="{w}"];')
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def graph_to_dict(graph: FlowGraph) -> dict:
    return {
        "nodes": sorted(graph.nodes),
        "edges": [{"src": s, "dst": d, "weight": w} for (s, d), w in sorted(graph.edges.items())],
        "excluded_types": sorted(graph.excluded_types),
    }


def emit_json(graph: FlowGraph) -> bytes:
    return (json.dumps(graph_to_dict(graph), indent=2) + "\n").encode("utf-8")


def load_json(data: bytes | str) -> FlowGraph:
    doc = json.loads(data)
    edges = {(e["src"], e["dst"]): int(e["weight"]) for e in doc["edges"]}
    return FlowGraph(frozenset(doc["nodes"]), edges, frozenset(doc.get("excluded_types", ())))
