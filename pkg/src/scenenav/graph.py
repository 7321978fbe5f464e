"""The layered scene graph instance: typed nodes, typed edges, feature access.

A graph is bound to a schema; every stored edge triple (source concept, edge
kind, target concept) must be permitted by it.  Node ids follow the
``<label-or-class>_<counter>`` convention (``livingroom_1``, ``door_2``) so
graph content can be rendered verbatim into text prompts.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .schema import ConceptKind, EdgeKind, Schema

__all__ = [
    "ObjectNode",
    "PlaceNode",
    "ConnectorNode",
    "RegionNode",
    "ObjectFeatures",
    "SceneGraph",
    "GraphError",
    "UnknownNodeError",
    "EdgeRuleError",
    "GraphCorruptionError",
    "validate_graph",
    "import_graph",
]


class GraphError(Exception):
    pass


class UnknownNodeError(GraphError):
    pass


class EdgeRuleError(GraphError):
    pass


class GraphCorruptionError(GraphError):
    pass


@dataclass
class ObjectNode:
    label: str
    desc: str = ""
    image_ref: str = ""
    id: str = ""

    kind = ConceptKind.OBJECT_ROLE


@dataclass
class PlaceNode:
    cls: str
    label: str
    id: str = ""
    aliases: list[str] = field(default_factory=list)

    kind = ConceptKind.PLACE


@dataclass
class ConnectorNode:
    cls: str
    label: str
    desc: str = ""
    image_ref: str = ""
    id: str = ""

    kind = ConceptKind.CONNECTOR


@dataclass
class RegionNode:
    cls: str
    label: str
    id: str = ""

    kind = ConceptKind.REGION


Node = ObjectNode | PlaceNode | ConnectorNode | RegionNode


@dataclass
class ObjectFeatures:
    """Aggregated (label, description) pairs of a node's semantic context.

    Equality is order-insensitive: two feature sets are equal when they hold
    the same multiset of pairs.
    """

    items: tuple[tuple[str, str], ...] = ()

    def labels(self) -> list[str]:
        return [label for label, _ in self.items]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ObjectFeatures):
            return NotImplemented
        return Counter(self.items) == Counter(other.items)

    def __bool__(self) -> bool:
        return bool(self.items)


def _id_prefix(node: Node) -> str:
    if isinstance(node, (ObjectNode, ConnectorNode, PlaceNode, RegionNode)):
        label = node.label.strip()
        if label:
            return label
    return getattr(node, "cls", "node")


class SceneGraph:
    """Mutable layered scene graph bound to a schema.

    One writer at a time; readers may interleave between mutations.  The
    ``version`` counter increments on every mutation, which lets planners
    detect staleness cheaply.
    """

    def __init__(self, schema: Schema):
        self.schema = schema
        self._nodes: dict[str, Node] = {}
        self._counters: dict[str, int] = {}
        self._out: dict[str, dict[EdgeKind, list[str]]] = {}
        self._in: dict[str, dict[EdgeKind, list[str]]] = {}
        self._weights: dict[tuple[str, str, EdgeKind], float] = {}
        self.version = 0

    # -- nodes ---------------------------------------------------------------

    def node_cls(self, node: Node) -> str:
        if isinstance(node, ObjectNode):
            role = self.schema.object_concept
            if role is None:
                raise EdgeRuleError("schema declares no object concept")
            return role.name
        return node.cls

    def add_node(self, node: Node) -> str:
        cls = self.node_cls(node)
        concept = self.schema.concepts.get(cls)
        if concept is None or concept.kind is not node.kind:
            raise EdgeRuleError(
                f"class {cls!r} is not a {node.kind.value} concept of the active schema"
            )
        prefix = _id_prefix(node)
        count = self._counters.get(prefix, 0) + 1
        self._counters[prefix] = count
        node.id = f"{prefix}_{count}"
        self._nodes[node.id] = node
        self._out[node.id] = {}
        self._in[node.id] = {}
        self.version += 1
        return node.id

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"no node {node_id!r}") from None

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def nodes(self, kind: ConceptKind | None = None) -> list[Node]:
        if kind is None:
            return list(self._nodes.values())
        return [n for n in self._nodes.values() if n.kind is kind]

    def places(self) -> list[PlaceNode]:
        return [n for n in self._nodes.values() if isinstance(n, PlaceNode)]

    def layer_nodes(self, layer: int) -> list[Node]:
        out = []
        for n in self._nodes.values():
            concept = self.schema.concepts.get(self.node_cls(n))
            if concept is not None and concept.layer_id == layer:
                out.append(n)
        return out

    def node_layer(self, node_id: str) -> int:
        concept = self.schema.concepts[self.node_cls(self.node(node_id))]
        return concept.layer_id

    # -- edges ---------------------------------------------------------------

    def has_edge(self, src: str, dst: str, kind: EdgeKind) -> bool:
        return dst in self._out.get(src, {}).get(kind, ())

    def add_edge(self, src: str, dst: str, kind: EdgeKind, weight: float = 1.0) -> None:
        src_node = self.node(src)
        dst_node = self.node(dst)
        if src == dst:
            raise EdgeRuleError(f"self-loop on {src!r} rejected")
        if not self.schema.permits(self.node_cls(src_node), kind, self.node_cls(dst_node)):
            raise EdgeRuleError(
                f"schema forbids {kind.value} edge "
                f"{self.node_cls(src_node)} -> {self.node_cls(dst_node)}"
            )
        if kind is EdgeKind.CONTAINS:
            parents = self._in[dst].get(kind, [])
            if parents:
                if src in parents:
                    return
                raise EdgeRuleError(
                    f"{dst!r} already has a containing parent {parents[0]!r}"
                )
        if self.has_edge(src, dst, kind):
            return
        self._insert(src, dst, kind, weight)
        if kind is EdgeKind.CONNECTS_TO and not self.has_edge(dst, src, kind):
            self._insert(dst, src, kind, weight)
        self.version += 1

    def _insert(self, src: str, dst: str, kind: EdgeKind, weight: float) -> None:
        self._out[src].setdefault(kind, []).append(dst)
        self._in[dst].setdefault(kind, []).append(src)
        self._weights[(src, dst, kind)] = weight

    def edges(self) -> list[tuple[str, str, EdgeKind]]:
        out = []
        for src, by_kind in self._out.items():
            for kind, targets in by_kind.items():
                for dst in targets:
                    out.append((src, dst, kind))
        return out

    def out_neighbors(self, node_id: str, kind: EdgeKind) -> list[str]:
        self.node(node_id)
        return list(self._out[node_id].get(kind, ()))

    def in_neighbors(self, node_id: str, kind: EdgeKind) -> list[str]:
        self.node(node_id)
        return list(self._in[node_id].get(kind, ()))

    # -- derived views ---------------------------------------------------------

    def object_features(self, node_id: str) -> ObjectFeatures:
        """Semantic signature of a node, per its kind.

        Leaf nodes aggregate their proximity neighbours, places aggregate the
        objects they hold, regions aggregate over all contained places.
        """
        node = self.node(node_id)
        if isinstance(node, (ObjectNode, ConnectorNode)):
            seen: list[str] = []
            for nb in self.out_neighbors(node_id, EdgeKind.IS_NEAR):
                if nb not in seen:
                    seen.append(nb)
            for nb in self.in_neighbors(node_id, EdgeKind.IS_NEAR):
                if nb not in seen:
                    seen.append(nb)
            items = [self._leaf_pair(nb) for nb in seen]
            return ObjectFeatures(items=tuple(items))
        if isinstance(node, PlaceNode):
            items = [
                self._leaf_pair(obj) for obj in self.out_neighbors(node_id, EdgeKind.HAS)
            ]
            return ObjectFeatures(items=tuple(items))
        items = []
        for child in self.out_neighbors(node_id, EdgeKind.CONTAINS):
            items.extend(self.object_features(child).items)
        return ObjectFeatures(items=tuple(items))

    def _leaf_pair(self, node_id: str) -> tuple[str, str]:
        node = self.node(node_id)
        return (node.label, getattr(node, "desc", ""))

    def connectivity_subgraph(self) -> dict[str, dict[str, float]]:
        """Weighted undirected adjacency over the place/connector layer.

        Key order follows node insertion order, keeping downstream tie-breaks
        reproducible across processes.
        """
        layer2 = [
            n.id for n in self._nodes.values() if isinstance(n, (PlaceNode, ConnectorNode))
        ]
        members = set(layer2)
        adj: dict[str, dict[str, float]] = {nid: {} for nid in layer2}
        for nid in layer2:
            for nb in self._out[nid].get(EdgeKind.CONNECTS_TO, ()):
                if nb in members:
                    adj[nid][nb] = self._weights[(nid, nb, EdgeKind.CONNECTS_TO)]
        return adj

    def parent_region(self, node_id: str) -> str | None:
        parents = self.in_neighbors(node_id, EdgeKind.CONTAINS)
        if not parents:
            return None
        if len(parents) > 1:
            raise GraphCorruptionError(
                f"{node_id!r} has {len(parents)} containing parents: {parents}"
            )
        return parents[0]

    def find_by_image_ref(self, image_ref: str) -> str | None:
        if not image_ref:
            return None
        for node in self._nodes.values():
            if getattr(node, "image_ref", "") == image_ref:
                return node.id
        return None

    # -- export ----------------------------------------------------------------

    def export(self, fmt: str = "structured") -> str:
        if fmt == "structured":
            return self._export_structured()
        if fmt == "dot":
            return self._export_dot()
        raise ValueError(f"unknown export format {fmt!r}")

    def _export_structured(self) -> str:
        nodes = []
        for node in self._nodes.values():
            entry = {
                "id": node.id,
                "layer": self.node_layer(node.id),
                "cls": self.node_cls(node),
                "label": node.label,
                "desc": getattr(node, "desc", ""),
            }
            image_ref = getattr(node, "image_ref", "")
            if image_ref:
                entry["image_ref"] = image_ref
            aliases = getattr(node, "aliases", None)
            if aliases:
                entry["aliases"] = list(aliases)
            nodes.append(entry)
        edges = [
            {"src": src, "dst": dst, "kind": kind.value}
            for src, dst, kind in self.edges()
        ]
        return json.dumps({"nodes": nodes, "edges": edges}, indent=2, ensure_ascii=False) + "\n"

    def _export_dot(self) -> str:
        lines = ["digraph scene {", "  rankdir=BT;"]
        by_layer: dict[int, list[Node]] = {}
        for node in self._nodes.values():
            by_layer.setdefault(self.node_layer(node.id), []).append(node)
        for layer in sorted(by_layer):
            lines.append(f"  subgraph cluster_{layer} {{")
            lines.append(f'    label="layer {layer}";')
            for node in by_layer[layer]:
                lines.append(f'    "{node.id}" [label="{node.label}"];')
            lines.append("  }")
        style = {
            EdgeKind.IS_NEAR: "dashed",
            EdgeKind.CONNECTS_TO: "solid",
            EdgeKind.HAS: "dotted",
            EdgeKind.CONTAINS: "bold",
        }
        for src, dst, kind in self.edges():
            lines.append(f'  "{src}" -> "{dst}" [style={style[kind]}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def hop_distances(graph: SceneGraph, source: str | None) -> dict[str, int]:
    """BFS hop counts over the connectivity layer from a source node."""
    if source is None or source not in graph:
        return {}
    adj = graph.connectivity_subgraph()
    if source not in adj:
        return {}
    dist = {source: 0}
    queue = [source]
    while queue:
        node = queue.pop(0)
        for nb in adj.get(node, ()):
            if nb not in dist:
                dist[nb] = dist[node] + 1
                queue.append(nb)
    return dist


def import_graph(document: str, schema: Schema) -> SceneGraph:
    """Rebuild a graph from its structured export."""
    raw = json.loads(document)
    graph = SceneGraph(schema)
    id_map: dict[str, str] = {}
    for entry in raw.get("nodes", ()):
        cls = entry["cls"]
        concept = schema.concepts.get(cls)
        if concept is None:
            raise EdgeRuleError(f"import references unknown concept {cls!r}")
        if concept.kind is ConceptKind.OBJECT_ROLE:
            node: Node = ObjectNode(
                label=entry["label"],
                desc=entry.get("desc", ""),
                image_ref=entry.get("image_ref", ""),
            )
        elif concept.kind is ConceptKind.PLACE:
            node = PlaceNode(cls=cls, label=entry["label"])
            node.aliases = list(entry.get("aliases", []))
        elif concept.kind is ConceptKind.CONNECTOR:
            node = ConnectorNode(
                cls=cls,
                label=entry["label"],
                desc=entry.get("desc", ""),
                image_ref=entry.get("image_ref", ""),
            )
        else:
            node = RegionNode(cls=cls, label=entry["label"])
        id_map[entry["id"]] = graph.add_node(node)
    for entry in raw.get("edges", ()):
        src = id_map.get(entry["src"], entry["src"])
        dst = id_map.get(entry["dst"], entry["dst"])
        graph.add_edge(src, dst, EdgeKind(entry["kind"]))
    return graph


def validate_graph(graph: SceneGraph) -> list[str]:
    """Full-scan structural audit; returns human-readable violations.

    Checks edge simplicity, schema conformance of every stored triple,
    connectivity symmetry, the single-parent containment forest and that
    containment never skips layers.
    """
    problems: list[str] = []
    all_edges = graph.edges()
    edge_set: set[tuple[str, str, EdgeKind]] = set()
    for triple in all_edges:
        if triple in edge_set:
            problems.append(f"duplicate edge {triple}")
        edge_set.add(triple)
    for src, dst, kind in all_edges:
        if src == dst:
            problems.append(f"self-loop on {src}")
        src_cls = graph.node_cls(graph.node(src))
        dst_cls = graph.node_cls(graph.node(dst))
        if not graph.schema.permits(src_cls, kind, dst_cls):
            problems.append(f"edge {(src, dst, kind)} violates schema ({src_cls} -> {dst_cls})")
        if kind is EdgeKind.CONNECTS_TO and (dst, src, kind) not in edge_set:
            problems.append(f"connectivity edge {src} -> {dst} lacks its reverse")
        if kind is EdgeKind.CONTAINS:
            if graph.node_layer(src) != graph.node_layer(dst) + 1:
                problems.append(f"containment {src} -> {dst} skips a layer")
    for node in graph.nodes():
        parents = graph.in_neighbors(node.id, EdgeKind.CONTAINS)
        if len(parents) > 1:
            problems.append(f"{node.id} has multiple parents {parents}")
    return problems
