"""Search planning over the scene graph: where to look next, and how to get there.

Region proposal walks the abstraction hierarchy top-down, asking the oracle
at every layer which node is most promising for the goal; unexplored
connectors are offered beside known places because new doors are the natural
frontiers of a topological map.  A Dijkstra pass over the place/connector
connectivity turns the chosen target into a next waypoint, and object
proposal grounds that waypoint into a concrete leaf to steer toward.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

from .graph import SceneGraph, hop_distances
from .oracle.base import SemanticOracle
from .schema import ConceptKind, EdgeKind, Schema

logger = logging.getLogger(__name__)

__all__ = [
    "SubgoalPlan",
    "PlannerMemory",
    "ExhaustedError",
    "find_path",
    "propose_region",
    "propose_object",
    "reason_step",
    "export_plan_trace",
]


class ExhaustedError(RuntimeError):
    """Nothing left to search: no promising region and no frontier."""


@dataclass(frozen=True)
class SubgoalPlan:
    target_region: str | None = None
    waypoint: str | None = None
    object_goal: tuple[str, str] | None = None  # (node id, image_ref)


@dataclass
class PlannerMemory:
    exhausted: set[str] = field(default_factory=set)
    last_proposal: tuple[str | None, str] | None = None
    last_version: int = -1
    resets: int = 0
    max_resets: int = 8
    trace: list[dict] = field(default_factory=list)


def find_path(graph: SceneGraph, frm: str, to: str) -> list[str] | None:
    """Cheapest route in the connectivity layer, excluding the start node.

    Returns ``[]`` when already there and ``None`` when unreachable.
    """
    adj = graph.connectivity_subgraph()
    if frm not in adj or to not in adj:
        return None
    if frm == to:
        return []
    dist: dict[str, float] = {frm: 0.0}
    prev: dict[str, str] = {}
    counter = 0
    heap: list[tuple[float, int, str]] = [(0.0, counter, frm)]
    visited: set[str] = set()
    while heap:
        d, _, node = heapq.heappop(heap)
        if node in visited:
            continue
        visited.add(node)
        if node == to:
            break
        for nb, weight in adj[node].items():
            nd = d + weight
            if nd < dist.get(nb, float("inf")):
                dist[nb] = nd
                prev[nb] = node
                counter += 1
                heapq.heappush(heap, (nd, counter, nb))
    if to not in visited:
        return None
    path = [to]
    while path[-1] != frm:
        path.append(prev[path[-1]])
    path.reverse()
    return path[1:]


def _is_connector(graph: SceneGraph, node_id: str) -> bool:
    return graph.node(node_id).kind is ConceptKind.CONNECTOR


def _frontier_connectors(graph: SceneGraph) -> list[str]:
    """Connectors seen from at most one place: likely doors to unmapped space."""
    adj = graph.connectivity_subgraph()
    out = []
    for node_id, neighbors in adj.items():
        if not _is_connector(graph, node_id):
            continue
        place_sides = [nb for nb in neighbors if not _is_connector(graph, nb)]
        if len(place_sides) <= 1:
            out.append(node_id)
    return out


def _summary(graph: SceneGraph, node_id: str) -> str:
    node = graph.node(node_id)
    if node.kind is ConceptKind.REGION:
        children = graph.out_neighbors(node_id, EdgeKind.CONTAINS)
        return ", ".join(graph.node(c).label for c in children)
    return ", ".join(graph.object_features(node_id).labels())


def _candidate_tuple(graph: SceneGraph, node_id: str) -> tuple[str, str, str]:
    return (node_id, graph.node(node_id).label, _summary(graph, node_id))


def _nearest_frontier(graph: SceneGraph, current: str | None, exhausted: set[str]) -> str | None:
    frontiers = [f for f in _frontier_connectors(graph) if f not in exhausted]
    if not frontiers:
        return None
    if current is None or current not in graph:
        return frontiers[0]
    best = None
    best_cost = float("inf")
    for frontier in frontiers:
        path = find_path(graph, current, frontier)
        cost = len(path) if path is not None else float("inf")
        if cost < best_cost:
            best_cost = cost
            best = frontier
    return best if best is not None else frontiers[0]


def propose_region(
    schema: Schema,
    graph: SceneGraph,
    goal: str,
    oracle: SemanticOracle,
    current: str | None = None,
    exhausted: set[str] | None = None,
) -> str:
    """Coarse-to-fine pick of a layer-2 target to search for the goal.

    Candidates are handed to the oracle nearest-first, so with no semantic
    signal the tie-break sweeps outward instead of ping-ponging across the map.
    """
    exhausted = exhausted or set()
    if not graph.places():
        raise ExhaustedError("the graph holds no places yet")

    region_layers = sorted(
        {c.layer_id for c in schema.by_kind(ConceptKind.REGION)}, reverse=True
    )
    start_nodes: list[str] = []
    for layer in region_layers:
        start_nodes = [n.id for n in graph.layer_nodes(layer) if n.kind is ConceptKind.REGION]
        if start_nodes:
            break

    distances = hop_distances(graph, current)
    frontier = _order(
        [f for f in _frontier_connectors(graph) if f not in exhausted], distances
    )

    if not start_nodes:
        candidates = _order(
            [p.id for p in graph.places() if p.id not in exhausted], distances
        ) + frontier
        return _select_layer2(graph, goal, oracle, candidates, current, exhausted)

    chosen = _descend(graph, goal, oracle, start_nodes, frontier, exhausted, distances)
    if chosen is not None:
        return chosen
    fallback = _nearest_frontier(graph, current, exhausted)
    if fallback is not None:
        return fallback
    raise ExhaustedError("no unexplored region or connector remains")


def _order(ids: list[str], distances: dict[str, int]) -> list[str]:
    index = {node_id: i for i, node_id in enumerate(ids)}
    return sorted(ids, key=lambda n: (distances.get(n, float("inf")), index[n]))


def _select_layer2(
    graph: SceneGraph,
    goal: str,
    oracle: SemanticOracle,
    candidates: list[str],
    current: str | None,
    exhausted: set[str],
) -> str:
    if not candidates:
        fallback = _nearest_frontier(graph, current, exhausted)
        if fallback is not None:
            return fallback
        raise ExhaustedError("no unexplored region or connector remains")
    proposal = oracle.select_region([_candidate_tuple(graph, c) for c in candidates], goal)
    return proposal.chosen


def _descend(
    graph: SceneGraph,
    goal: str,
    oracle: SemanticOracle,
    start_nodes: list[str],
    frontier: list[str],
    exhausted: set[str],
    distances: dict[str, int],
) -> str | None:
    """Walk containment downward; every pick is a child of the previous pick."""

    def region_key(region_id: str) -> tuple[float, str]:
        children = graph.out_neighbors(region_id, EdgeKind.CONTAINS)
        reach = [distances[c] for c in children if c in distances]
        return (min(reach) if reach else float("inf"), region_id)

    level = sorted(start_nodes, key=region_key)
    while level:
        proposal = oracle.select_region([_candidate_tuple(graph, n) for n in level], goal)
        node = graph.node(proposal.chosen)
        if node.kind is not ConceptKind.REGION:
            return proposal.chosen
        children = graph.out_neighbors(node.id, EdgeKind.CONTAINS)
        if all(graph.node(c).kind is ConceptKind.REGION for c in children) and children:
            level = sorted(children, key=region_key)
            continue
        places = _order([c for c in children if c not in exhausted], distances)
        nearby_frontier = [
            f
            for f in frontier
            if any(not _is_connector(graph, nb) and nb in children
                   for nb in graph.out_neighbors(f, EdgeKind.CONNECTS_TO))
        ]
        candidates = places + nearby_frontier
        if not candidates:
            return None
        proposal = oracle.select_region(
            [_candidate_tuple(graph, c) for c in candidates], goal
        )
        return proposal.chosen
    return None


def propose_object(
    graph: SceneGraph,
    region: str,
    goal: str,
    oracle: SemanticOracle,
    toward: str | None = None,
) -> tuple[str, str, str]:
    """Ground a region into a leaf to steer toward; connectors pass through as-is.

    Returns (node id, image handle, reasoning).
    """
    node = graph.node(region)
    if node.kind is ConceptKind.CONNECTOR:
        return (region, getattr(node, "image_ref", ""), "the target is itself a passage")
    objects = graph.out_neighbors(region, EdgeKind.HAS)
    connectors = [
        nb
        for nb in graph.out_neighbors(region, EdgeKind.CONNECTS_TO)
        if _is_connector(graph, nb)
    ]
    if toward is not None and toward in connectors:
        t = graph.node(toward)
        return (toward, getattr(t, "image_ref", ""), "this passage continues the planned path")
    leaves = objects + connectors
    if not leaves:
        if connectors:
            entry = graph.node(connectors[0])
            return (connectors[0], getattr(entry, "image_ref", ""), "empty place; using its entry")
        raise ExhaustedError(f"{region} holds no leaf to steer toward")
    proposal = oracle.select_object(
        [(l, graph.node(l).label, getattr(graph.node(l), "desc", "")) for l in leaves],
        goal,
    )
    chosen = graph.node(proposal.chosen)
    return (proposal.chosen, getattr(chosen, "image_ref", ""), proposal.reasoning)


def _reached(graph: SceneGraph, target: str, current: str | None) -> bool:
    if current is None:
        return False
    if current == target:
        return True
    return _is_connector(graph, target) and graph.has_edge(
        current, target, EdgeKind.CONNECTS_TO
    )


def reason_step(
    schema: Schema,
    graph: SceneGraph,
    current: str | None,
    plan: SubgoalPlan,
    goal: str,
    oracle: SemanticOracle,
    memory: PlannerMemory | None = None,
) -> SubgoalPlan:
    """Advance the plan one decision: pick/approach/search the target region."""
    memory = memory if memory is not None else PlannerMemory()
    attempts = len(graph.places()) + len(_frontier_connectors(graph)) + 2
    target = plan.target_region
    for _ in range(attempts):
        if target is None:
            try:
                target = propose_region(
                    schema, graph, goal, oracle, current=current, exhausted=memory.exhausted
                )
            except ExhaustedError:
                if not memory.exhausted or memory.resets >= memory.max_resets:
                    raise
                # everything has been swept once; detections drop out, so a
                # bounded number of fresh passes may still find the goal
                logger.debug("search memory exhausted; starting a fresh sweep")
                memory.resets += 1
                memory.exhausted.clear()
                target = propose_region(
                    schema, graph, goal, oracle, current=current, exhausted=memory.exhausted
                )
        if _reached(graph, target, current):
            node_id, image_ref, why = propose_object(graph, target, goal, oracle)
            result = SubgoalPlan(
                target_region=None, waypoint=None, object_goal=(node_id, image_ref)
            )
            memory.exhausted.add(target)
            if _is_repeat(memory, graph, result):
                target = None
                continue
            _remember(memory, graph, result, [], why)
            return result
        path = find_path(graph, current, target) if current is not None else None
        if current is not None and path is None:
            logger.debug("target %s unreachable from %s; re-proposing", target, current)
            memory.exhausted.add(target)
            target = None
            continue
        if current is None or not path:
            node_id, image_ref, why = propose_object(graph, target, goal, oracle)
            result = SubgoalPlan(
                target_region=target, waypoint=None, object_goal=(node_id, image_ref)
            )
            if _is_repeat(memory, graph, result):
                memory.exhausted.add(target)
                target = None
                continue
            _remember(memory, graph, result, [], why)
            return result
        waypoint = path[0]
        toward = path[1] if len(path) > 1 else None
        node_id, image_ref, why = propose_object(graph, waypoint, goal, oracle, toward=toward)
        result = SubgoalPlan(
            target_region=target, waypoint=waypoint, object_goal=(node_id, image_ref)
        )
        if _is_repeat(memory, graph, result):
            memory.exhausted.add(target)
            target = None
            continue
        _remember(memory, graph, result, path, why)
        return result
    raise ExhaustedError("planner cycled without finding a new proposal")


def _is_repeat(memory: PlannerMemory, graph: SceneGraph, plan: SubgoalPlan) -> bool:
    if plan.object_goal is None:
        return False
    pair = (plan.target_region, plan.object_goal[0])
    return pair == memory.last_proposal and graph.version == memory.last_version


def _remember(
    memory: PlannerMemory,
    graph: SceneGraph,
    plan: SubgoalPlan,
    path: list[str],
    reasoning: str,
) -> None:
    assert plan.object_goal is not None
    memory.last_proposal = (plan.target_region, plan.object_goal[0])
    memory.last_version = graph.version
    memory.trace.append(
        {
            "target_region": plan.target_region,
            "path": list(path),
            "waypoint": plan.waypoint,
            "object_goal": plan.object_goal[0],
            "reasoning": reasoning,
            "graph_version": graph.version,
        }
    )


def export_plan_trace(memory: PlannerMemory) -> str:
    import json

    return "\n".join(json.dumps(rec) for rec in memory.trace) + ("\n" if memory.trace else "")
