"""Incremental topo-semantic mapping: one observation frame in, graph update out.

Each frame passes through three stages.  Parsing turns raw detections into a
structured observation (place guess, leaf elements, proximity pairs, goal
check).  State estimation decides whether the agent stands in an already
mapped place by matching object features against semantically similar places,
nearest first.  Integration either opens a new place (wiring connectivity
back to the previous one and updating the region hierarchy bottom-up) or
folds the observation into the recognised place through per-leaf data
association.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .graph import (
    ConnectorNode,
    ObjectFeatures,
    ObjectNode,
    PlaceNode,
    RegionNode,
    SceneGraph,
    hop_distances,
)
from .oracle.base import SemanticOracle
from .oracle.rules import strip_suffix
from .schema import ConceptKind, EdgeKind, Schema

logger = logging.getLogger(__name__)

__all__ = [
    "Detection",
    "DetectionFrame",
    "ParsedObservation",
    "MapperConfig",
    "MapperState",
    "StepResult",
    "FrameError",
    "parse_frame",
    "estimate_state",
    "update_graph",
    "mapper_step",
    "frames_to_jsonl",
    "frames_from_jsonl",
]


class FrameError(ValueError):
    """An observation frame violates its contract."""


@dataclass(frozen=True)
class Detection:
    label: str
    desc: str = ""
    bbox: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)  # x, y, w, h
    image_ref: str = ""

    @property
    def area(self) -> float:
        return self.bbox[2] * self.bbox[3]

    @property
    def centroid(self) -> tuple[float, float]:
        x, y, w, h = self.bbox
        return (x + w / 2.0, y + h / 2.0)


@dataclass(frozen=True)
class DetectionFrame:
    frame_id: int
    place_type_answer: str
    place_label_answer: str
    detections: tuple[Detection, ...] = ()
    previous_subgoal: str | None = None


@dataclass(frozen=True)
class ParsedObservation:
    place: tuple[str, str]  # (concept name, label)
    objects: tuple[tuple[str, str, str], ...] = ()  # (label, desc, image_ref)
    connectors: tuple[tuple[str, str, str], ...] = ()
    near_pairs: tuple[tuple[int, int], ...] = ()  # indices into objects + connectors
    goal_hit: Detection | None = None

    def leaf_features(self) -> ObjectFeatures:
        pairs = [(label, desc) for label, desc, _ in self.objects]
        pairs += [(label, desc) for label, desc, _ in self.connectors]
        return ObjectFeatures(items=tuple(pairs))


@dataclass(frozen=True)
class MapperConfig:
    beta_pix: float = 100.0
    beta_iou: float = 0.1
    min_obj_area: float = 200.0
    goal: str | None = None


@dataclass
class MapperState:
    graph: SceneGraph
    current_place: str | None = None
    place_history: list[str] = field(default_factory=list)
    pending_links: list[tuple[str, str]] = field(default_factory=list)


@dataclass(frozen=True)
class StepResult:
    state: MapperState
    goal_hit: Detection | None = None
    revisit: bool = False
    obs: ParsedObservation | None = None


def _iou(a: Detection, b: Detection) -> float:
    ax, ay, aw, ah = a.bbox
    bx, by, bw, bh = b.bbox
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def _near(a: Detection, b: Detection, config: MapperConfig) -> bool:
    (ax, ay), (bx, by) = a.centroid, b.centroid
    dist = ((ax - bx) ** 2 + (ay - by) ** 2) ** 0.5
    return dist < config.beta_pix or _iou(a, b) > config.beta_iou


def parse_frame(
    frame: DetectionFrame, schema: Schema, oracle: SemanticOracle, config: MapperConfig
) -> ParsedObservation:
    """Structure one detection frame: classify leaves, wire proximity, spot the goal."""
    place_concept = schema.concepts.get(frame.place_type_answer)
    if place_concept is None or place_concept.kind is not ConceptKind.PLACE:
        raise FrameError(
            f"frame {frame.frame_id}: {frame.place_type_answer!r} is not a place "
            f"concept of the active schema"
        )
    for det in frame.detections:
        if not det.label:
            raise FrameError(f"frame {frame.frame_id}: empty detection label")
        if min(det.bbox) < 0:
            raise FrameError(f"frame {frame.frame_id}: negative bbox coordinate")

    kept = [d for d in frame.detections if d.area >= config.min_obj_area]
    tagged = [f"{d.label}_{i}" for i, d in enumerate(kept)]
    classified = oracle.classify_elements(tagged, schema)

    def _resolve(tags: tuple[str, ...]) -> list[Detection]:
        out = []
        for tag in tags:
            idx = int(tag.rsplit("_", 1)[1])
            out.append(kept[idx])
        return out

    object_dets = _resolve(classified.objects)
    connector_dets = _resolve(classified.connectors)
    ordered = object_dets + connector_dets
    near_pairs = []
    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            if _near(ordered[i], ordered[j], config):
                near_pairs.append((i, j))

    goal_hit = None
    if config.goal:
        hit = oracle.goal_match([(d.label, d.desc) for d in ordered], config.goal)
        if hit is not None:
            goal_hit = next(d for d in ordered if (d.label, d.desc) == hit)

    return ParsedObservation(
        place=(place_concept.name, frame.place_label_answer),
        objects=tuple((d.label, d.desc, d.image_ref) for d in object_dets),
        connectors=tuple((d.label, d.desc, d.image_ref) for d in connector_dets),
        near_pairs=tuple(near_pairs),
        goal_hit=goal_hit,
    )


def _place_signature(graph: SceneGraph, place_id: str) -> ObjectFeatures:
    """Stored features of a place plus its adjacent connectors.

    The observation side of place matching always carries doors and stairs, so
    the stored side gets them too; otherwise every comparison is diluted.
    """
    items = list(graph.object_features(place_id).items)
    for nb in graph.out_neighbors(place_id, EdgeKind.CONNECTS_TO):
        node = graph.node(nb)
        if node.kind is ConceptKind.CONNECTOR:
            items.append((node.label, getattr(node, "desc", "")))
    return ObjectFeatures(items=tuple(items))


def estimate_state(
    schema: Schema,
    graph: SceneGraph,
    prev_state: str | None,
    obs: ParsedObservation,
    oracle: SemanticOracle,
) -> str | None:
    """Recognise the currently occupied place, or none if it looks unvisited."""
    place_ids = [p.id for p in graph.places()]
    if not place_ids:
        return None
    candidates = oracle.similar_labels(obs.place[1], place_ids)
    if not candidates:
        return None
    distances = hop_distances(graph, prev_state)
    order = {pid: i for i, pid in enumerate(place_ids)}
    candidates.sort(key=lambda pid: (distances.get(pid, float("inf")), order[pid]))
    observed = obs.leaf_features()
    for pid in candidates:
        stored = _place_signature(graph, pid)
        if oracle.match_place(stored, observed).matched:
            return pid
    return None


def _connector_concept_for(schema: Schema, label: str) -> str | None:
    connectors = schema.by_kind(ConceptKind.CONNECTOR)
    if not connectors:
        return None
    base = strip_suffix(label).lower()
    singular = base[:-1] if base.endswith("s") else base
    for concept in connectors:
        name = concept.name.lower()
        if name in (base, singular) or name + "s" == base:
            return concept.name
    return connectors[0].name


def _resolve_subgoal(graph: SceneGraph, ref: str | None) -> str | None:
    if not ref:
        return None
    if ref in graph:
        return ref
    return graph.find_by_image_ref(ref)


def _add_leaves(
    graph: SceneGraph,
    place_id: str,
    obs: ParsedObservation,
    assoc: dict[int, str],
    skip: set[int],
) -> None:
    """Create nodes for unassociated leaf detections and attach them to the place."""
    n_objects = len(obs.objects)
    for idx, (label, desc, image_ref) in enumerate(obs.objects):
        if idx in assoc or idx in skip:
            continue
        node_id = graph.add_node(ObjectNode(label=label, desc=desc, image_ref=image_ref))
        graph.add_edge(place_id, node_id, EdgeKind.HAS)
        assoc[idx] = node_id
    for k, (label, desc, image_ref) in enumerate(obs.connectors):
        idx = n_objects + k
        if idx in assoc or idx in skip:
            continue
        node_id = None
        if image_ref:
            # a connector already mapped from its other side carries the same
            # opaque handle; reuse it instead of splitting the passage in two
            known = graph.find_by_image_ref(image_ref)
            if known is not None and graph.node(known).kind is ConceptKind.CONNECTOR:
                node_id = known
                if desc:
                    graph.node(known).desc = desc
        if node_id is None:
            cls = _connector_concept_for(graph.schema, label)
            if cls is None:
                node_id = graph.add_node(ObjectNode(label=label, desc=desc, image_ref=image_ref))
                graph.add_edge(place_id, node_id, EdgeKind.HAS)
                assoc[idx] = node_id
                continue
            node_id = graph.add_node(
                ConnectorNode(cls=cls, label=label, desc=desc, image_ref=image_ref)
            )
        if graph.schema.permits(
            graph.node(place_id).cls, EdgeKind.CONNECTS_TO, graph.node(node_id).cls
        ):
            graph.add_edge(place_id, node_id, EdgeKind.CONNECTS_TO)
        assoc[idx] = node_id


def _associate_traversed_connector(
    graph: SceneGraph,
    obs: ParsedObservation,
    subgoal_node: str | None,
    assoc: dict[int, str],
) -> None:
    """Tie the just-traversed connector to its detection on the arrival side."""
    if subgoal_node is None or subgoal_node not in graph:
        return
    node = graph.node(subgoal_node)
    if node.kind is not ConceptKind.CONNECTOR:
        return
    n_objects = len(obs.objects)
    by_ref = None
    by_label = None
    for k, (label, desc, image_ref) in enumerate(obs.connectors):
        idx = n_objects + k
        if idx in assoc:
            continue
        if image_ref and image_ref == node.image_ref and by_ref is None:
            by_ref = idx
        if strip_suffix(label).lower() == strip_suffix(node.label).lower() and by_label is None:
            by_label = idx
    chosen = by_ref if by_ref is not None else by_label
    if chosen is not None:
        assoc[chosen] = subgoal_node


def _merge_near_edges(graph: SceneGraph, obs: ParsedObservation, assoc: dict[int, str]) -> None:
    for i, j in obs.near_pairs:
        a, b = assoc.get(i), assoc.get(j)
        if a is None or b is None or a == b:
            continue
        if graph.node(a).kind is ConceptKind.PLACE or graph.node(b).kind is ConceptKind.PLACE:
            continue
        graph.add_edge(a, b, EdgeKind.IS_NEAR)
        graph.add_edge(b, a, EdgeKind.IS_NEAR)


def _wire_previous(
    graph: SceneGraph,
    state: MapperState,
    prev_place: str | None,
    new_place: str,
    subgoal: str | None,
) -> None:
    """Record traversability between the previous place and the new one."""
    if prev_place is None or prev_place == new_place:
        return
    connector = None
    resolved = _resolve_subgoal(graph, subgoal)
    if resolved is not None and graph.node(resolved).kind is ConceptKind.CONNECTOR:
        connector = resolved
    if connector is not None:
        conn_cls = graph.node(connector).cls
        if graph.schema.permits(graph.node(prev_place).cls, EdgeKind.CONNECTS_TO, conn_cls):
            graph.add_edge(prev_place, connector, EdgeKind.CONNECTS_TO)
        if graph.schema.permits(conn_cls, EdgeKind.CONNECTS_TO, graph.node(new_place).cls):
            graph.add_edge(connector, new_place, EdgeKind.CONNECTS_TO)
            return
    if graph.schema.permits(
        graph.node(prev_place).cls, EdgeKind.CONNECTS_TO, graph.node(new_place).cls
    ):
        graph.add_edge(prev_place, new_place, EdgeKind.CONNECTS_TO)
        return
    pair = (prev_place, new_place)
    if pair not in state.pending_links:
        state.pending_links.append(pair)
        logger.debug("connectivity %s -> %s pending a connector observation", *pair)


def _retry_pending(graph: SceneGraph, state: MapperState) -> None:
    still: list[tuple[str, str]] = []
    layer2 = graph.connectivity_subgraph()
    for a, b in state.pending_links:
        linked = False
        for conn in layer2.get(a, ()):
            if graph.node(conn).kind is ConceptKind.CONNECTOR and b in layer2.get(conn, ()):
                linked = True
                break
        if not linked:
            still.append((a, b))
    state.pending_links[:] = still


def _region_layers(schema: Schema) -> list[int]:
    layers = sorted(
        {c.layer_id for c in schema.by_kind(ConceptKind.REGION)}
    )
    return layers


def _region_concept_for(schema: Schema, layer: int, child_cls: str) -> str | None:
    for concept in schema.by_kind(ConceptKind.REGION):
        if concept.layer_id != layer:
            continue
        for target in concept.targets(EdgeKind.CONTAINS):
            resolved = schema.resolve(target)
            if resolved is not None and resolved.name == child_cls:
                return concept.name
    return None


def _update_regions(
    graph: SceneGraph,
    schema: Schema,
    oracle: SemanticOracle,
    new_place: str,
    prev_place: str | None,
    subgoal_label: str | None,
) -> None:
    """Climb the region layers, attaching the new place to abstractions."""
    v_t = new_place
    v_prev = prev_place
    for layer in _region_layers(schema):
        region_cls = _region_concept_for(schema, layer, graph.node_cls(graph.node(v_t)))
        if region_cls is None:
            break
        existing = [
            (n.id, n.label)
            for n in graph.nodes(ConceptKind.REGION)
            if n.cls == region_cls
        ]
        prev_parent = graph.parent_region(v_prev) if v_prev is not None else None
        current = (v_t, graph.node(v_t).label)
        previous = (v_prev, graph.node(v_prev).label) if v_prev is not None else None
        choice = oracle.infer_region(
            schema,
            region_cls,
            existing,
            current,
            previous,
            previous_region=prev_parent,
            via_label=subgoal_label,
        )
        if not choice.is_new and choice.value in graph:
            graph.add_edge(choice.value, v_t, EdgeKind.CONTAINS)
            break
        region_id = graph.add_node(RegionNode(cls=region_cls, label=choice.value))
        graph.add_edge(region_id, v_t, EdgeKind.CONTAINS)
        if (
            v_prev is not None
            and prev_parent is None
            and graph.schema.permits(
                region_cls, EdgeKind.CONTAINS, graph.node_cls(graph.node(v_prev))
            )
        ):
            graph.add_edge(region_id, v_prev, EdgeKind.CONTAINS)
        v_t = region_id
        v_prev = prev_parent


def update_graph(
    schema: Schema,
    state: MapperState,
    est: str | None,
    obs: ParsedObservation,
    oracle: SemanticOracle,
    subgoal: str | None = None,
) -> MapperState:
    """Integrate one parsed observation, as a new place or a revisit."""
    graph = state.graph
    prev_place = state.current_place
    subgoal_node = _resolve_subgoal(graph, subgoal)
    subgoal_label = graph.node(subgoal_node).label if subgoal_node else None

    if est is None:
        place_id = graph.add_node(PlaceNode(cls=obs.place[0], label=obs.place[1]))
        assoc: dict[int, str] = {}
        _associate_traversed_connector(graph, obs, subgoal_node, assoc)
        for idx, node_id in assoc.items():
            if graph.schema.permits(
                graph.node(place_id).cls, EdgeKind.CONNECTS_TO, graph.node(node_id).cls
            ):
                graph.add_edge(place_id, node_id, EdgeKind.CONNECTS_TO)
        _add_leaves(graph, place_id, obs, assoc, skip=set())
        _merge_near_edges(graph, obs, assoc)
        _wire_previous(graph, state, prev_place, place_id, subgoal)
        _update_regions(graph, schema, oracle, place_id, prev_place, subgoal_label)
    else:
        place_id = est
        node = graph.node(place_id)
        if obs.place[1] != node.label and obs.place[1] not in node.aliases:
            node.aliases.append(obs.place[1])
        assoc = _associate_leaves(graph, place_id, obs, oracle)
        _add_leaves(graph, place_id, obs, assoc, skip=set())
        _merge_near_edges(graph, obs, assoc)
        _wire_previous(graph, state, prev_place, place_id, subgoal)

    _retry_pending(graph, state)
    state.current_place = place_id
    state.place_history.append(place_id)
    return state


def _associate_leaves(
    graph: SceneGraph,
    place_id: str,
    obs: ParsedObservation,
    oracle: SemanticOracle,
) -> dict[int, str]:
    """Match observed leaves against the place's known leaves; refresh matches."""
    object_ids = graph.out_neighbors(place_id, EdgeKind.HAS)
    connector_ids = [
        nb
        for nb in graph.out_neighbors(place_id, EdgeKind.CONNECTS_TO)
        if graph.node(nb).kind is ConceptKind.CONNECTOR
    ]
    leaves = object_ids + connector_ids
    candidates = [
        (
            leaf,
            graph.node(leaf).label,
            getattr(graph.node(leaf), "desc", ""),
            graph.object_features(leaf),
        )
        for leaf in leaves
    ]

    all_leaf_dets = list(obs.objects) + list(obs.connectors)
    near_map: dict[int, list[tuple[str, str]]] = {}
    for i, j in obs.near_pairs:
        near_map.setdefault(i, []).append(all_leaf_dets[j][:2])
        near_map.setdefault(j, []).append(all_leaf_dets[i][:2])

    assoc: dict[int, str] = {}
    claimed: set[str] = set()
    ref_of = {
        leaf: getattr(graph.node(leaf), "image_ref", "") for leaf in leaves
    }
    for idx, (label, desc, image_ref) in enumerate(all_leaf_dets):
        if not image_ref:
            continue
        for leaf in leaves:
            if leaf not in claimed and ref_of[leaf] and ref_of[leaf] == image_ref:
                assoc[idx] = leaf
                claimed.add(leaf)
                if desc:
                    graph.node(leaf).desc = desc
                break
    for idx, (label, desc, image_ref) in enumerate(all_leaf_dets):
        if idx in assoc:
            continue
        features = ObjectFeatures(items=tuple(near_map.get(idx, ())))
        open_candidates = [c for c in candidates if c[0] not in claimed]
        match = oracle.match_object((label, desc, features), open_candidates)
        if match is None:
            continue
        assoc[idx] = match
        claimed.add(match)
        node = graph.node(match)
        if desc:
            node.desc = desc
        if image_ref:
            node.image_ref = image_ref
    return assoc


def mapper_step(
    frame: DetectionFrame,
    schema: Schema,
    state: MapperState,
    oracle: SemanticOracle,
    config: MapperConfig,
) -> StepResult:
    """One full mapping cycle; short-circuits without mutating on a goal hit."""
    obs = parse_frame(frame, schema, oracle, config)
    if obs.goal_hit is not None:
        return StepResult(state=state, goal_hit=obs.goal_hit, obs=obs)
    est = estimate_state(schema, state.graph, state.current_place, obs, oracle)
    state = update_graph(schema, state, est, obs, oracle, subgoal=frame.previous_subgoal)
    return StepResult(state=state, goal_hit=None, revisit=est is not None, obs=obs)


# -- trajectory logs -----------------------------------------------------------


def frames_to_jsonl(frames: list[DetectionFrame]) -> str:
    lines = []
    for frame in frames:
        lines.append(
            json.dumps(
                {
                    "frame_id": frame.frame_id,
                    "place_type_answer": frame.place_type_answer,
                    "place_label_answer": frame.place_label_answer,
                    "previous_subgoal": frame.previous_subgoal,
                    "detections": [
                        {
                            "label": d.label,
                            "desc": d.desc,
                            "bbox": list(d.bbox),
                            "image_ref": d.image_ref,
                        }
                        for d in frame.detections
                    ],
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def frames_from_jsonl(text: str) -> list[DetectionFrame]:
    frames = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        raw = json.loads(line)
        frames.append(
            DetectionFrame(
                frame_id=raw["frame_id"],
                place_type_answer=raw["place_type_answer"],
                place_label_answer=raw["place_label_answer"],
                previous_subgoal=raw.get("previous_subgoal"),
                detections=tuple(
                    Detection(
                        label=d["label"],
                        desc=d.get("desc", ""),
                        bbox=tuple(d.get("bbox", (0, 0, 0, 0))),
                        image_ref=d.get("image_ref", ""),
                    )
                    for d in raw.get("detections", ())
                ),
            )
        )
    return frames
