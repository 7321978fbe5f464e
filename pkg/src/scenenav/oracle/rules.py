"""Deterministic rule backend: table lookups instead of generative calls.

Every decision is a pure function of the inputs and the loaded tables, so
replays are reproducible bit-for-bit across runs and platforms.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from ..graph import ObjectFeatures
from ..schema import ConceptKind, EdgeKind, Schema
from .base import ClassifiedElements, MatchDecision, Proposal, RegionChoice, SemanticOracle
from .tables import OracleTables, default_tables

__all__ = ["RuleOracle", "RuleConfig"]

_SUFFIX = re.compile(r"_\d+$")


def strip_suffix(label: str) -> str:
    return _SUFFIX.sub("", label).strip()


@dataclass(frozen=True)
class RuleConfig:
    match_threshold: float = 0.5
    large_weight: float = 3.0
    confidence_steepness: float = 4.0


class RuleOracle(SemanticOracle):
    def __init__(
        self,
        tables: OracleTables | None = None,
        config: RuleConfig | None = None,
        seed: int = 0,
    ):
        self.tables = tables if tables is not None else default_tables()
        self.config = config if config is not None else RuleConfig()
        self.seed = seed  # reserved; every rule below is deterministic

    # -- label handling --------------------------------------------------------

    def _canon(self, label: str) -> str:
        return self.tables.canonical(strip_suffix(label))

    def _weight(self, canon_label: str) -> float:
        return self.config.large_weight if self.tables.is_large(canon_label) else 1.0

    def _overlap(self, labels_a: list[str], labels_b: list[str]) -> float:
        """Weighted Jaccard on canonical label multisets; empty-vs-empty is 1."""
        a = Counter(self._canon(l) for l in labels_a)
        b = Counter(self._canon(l) for l in labels_b)
        if not a and not b:
            return 1.0
        inter = 0.0
        union = 0.0
        for label in sorted(set(a) | set(b)):
            w = self._weight(label)
            inter += w * min(a.get(label, 0), b.get(label, 0))
            union += w * max(a.get(label, 0), b.get(label, 0))
        return inter / union if union else 0.0

    # -- decisions ---------------------------------------------------------------

    def similar_labels(self, query: str, candidates: list[str]) -> list[str]:
        want = self._canon(query)
        return [c for c in candidates if self._canon(c) == want]

    def match_place(self, features_a: ObjectFeatures, features_b: ObjectFeatures) -> MatchDecision:
        overlap = self._overlap(features_a.labels(), features_b.labels())
        confidence = 1.0 / (
            1.0 + math.exp(-self.config.confidence_steepness * (overlap - 0.5))
        )
        matched = overlap >= self.config.match_threshold
        return MatchDecision(
            matched=matched,
            confidence=confidence,
            reasoning=f"weighted label overlap {overlap:.3f} vs threshold "
            f"{self.config.match_threshold}",
        )

    def classify_elements(self, labels: list[str], schema: Schema) -> ClassifiedElements:
        place_label: str | None = None
        connectors: list[str] = []
        objects: list[str] = []
        has_connector_concepts = bool(schema.by_kind(ConceptKind.CONNECTOR))
        seen: set[str] = set()
        for raw in labels:
            cleaned = self._strip_place_prefix(raw)
            if cleaned in seen:
                continue
            seen.add(cleaned)
            base = strip_suffix(cleaned).lower()
            if self.tables.is_structural(base):
                continue
            if self.tables.is_place_term(base):
                if place_label is None:
                    place_label = cleaned
                continue
            if has_connector_concepts and self.tables.is_connector_label(base):
                connectors.append(cleaned)
            else:
                objects.append(cleaned)
        return ClassifiedElements(
            place_label=place_label, connectors=tuple(connectors), objects=tuple(objects)
        )

    def _strip_place_prefix(self, label: str) -> str:
        # detectors sometimes emit "livingroom sofa"; drop the place word
        parts = label.split(" ")
        if len(parts) > 1 and self.tables.is_place_term(parts[0]):
            return " ".join(parts[1:]).strip()
        return label.strip()

    def match_object(
        self,
        probe: tuple[str, str, ObjectFeatures],
        candidates: list[tuple[str, str, str, ObjectFeatures]],
    ) -> str | None:
        probe_label, _, probe_features = probe
        want = self._canon(probe_label)
        best_id: str | None = None
        best_score = -1.0
        for cand_id, label, _, features in candidates:
            if self._canon(label) != want:
                continue
            score = self._overlap(probe_features.labels(), features.labels())
            if score > best_score:
                best_score = score
                best_id = cand_id
        return best_id

    def infer_region(
        self,
        schema: Schema,
        region_cls: str,
        existing: list[tuple[str, str]],
        current_place: tuple[str, str],
        previous_place: tuple[str, str] | None,
        previous_region: str | None = None,
        via_label: str | None = None,
    ) -> RegionChoice:
        if not existing:
            return RegionChoice(is_new=True, value=region_cls.lower())
        if via_label and self._crosses_region_boundary(schema, region_cls, via_label):
            return RegionChoice(is_new=True, value=region_cls.lower())
        existing_ids = {rid for rid, _ in existing}
        if previous_region is not None and previous_region in existing_ids:
            return RegionChoice(is_new=False, value=previous_region)
        return RegionChoice(is_new=True, value=region_cls.lower())

    def _crosses_region_boundary(self, schema: Schema, region_cls: str, via_label: str) -> bool:
        """True when the traversed element's concept links regions of this class."""
        base = strip_suffix(via_label)
        region = schema.concepts.get(region_cls)
        if region is None:
            return False
        for concept in schema.concepts.values():
            if concept.kind not in (ConceptKind.PLACE, ConceptKind.CONNECTOR):
                continue
            name = concept.name.lower()
            if not (self.tables.canonical(name) == self.tables.canonical(base)
                    or name == base.lower()):
                continue
            linked = any(
                (resolved := schema.resolve(t)) is not None and resolved.name == region_cls
                for t in concept.targets(EdgeKind.CONNECTS_TO)
            )
            linked_back = any(
                (resolved := schema.resolve(t)) is not None and resolved.name == concept.name
                for t in region.targets(EdgeKind.CONNECTS_TO)
            )
            if linked or linked_back:
                return True
        return False

    def select_region(self, candidates: list[tuple[str, str, str]], goal: str) -> Proposal:
        if not candidates:
            raise ValueError("select_region needs at least one candidate")
        want_places = self.tables.cooccurs(goal)
        goal_canon = self._canon(goal)
        best = candidates[0]
        best_score = -1.0
        for cand in candidates:
            cand_id, label, summary = cand
            summary_labels = [self._canon(s) for s in summary.split(",") if s.strip()]
            score = 0.0
            if goal_canon in summary_labels:
                score = 3.0
            elif any(s in want_places for s in summary_labels):
                # a coarse region whose children include a likely place
                score = 2.5
            elif self._canon(label) in want_places:
                score = 2.0
            elif self.tables.is_connector_label(strip_suffix(label)):
                score = 1.0
            if score > best_score:
                best_score = score
                best = cand
        reasons = {
            3.0: "its contents mention the goal",
            2.5: "it holds a place where the goal is typical",
            2.0: "the goal is typical for this kind of place",
            1.0: "an unexplored passage may lead to the goal",
        }
        return Proposal(
            chosen=best[0],
            reasoning=reasons.get(best_score, "no candidate stood out; taking the first"),
        )

    def select_object(self, objects: list[tuple[str, str, str]], goal: str) -> Proposal:
        if not objects:
            raise ValueError("select_object needs at least one candidate")
        goal_canon = self._canon(goal)
        for obj_id, label, _ in objects:
            if self._canon(label) == goal_canon:
                return Proposal(chosen=obj_id, reasoning="the object is the goal itself")
        near = self.tables.near_labels(goal)
        for obj_id, label, _ in objects:
            if self._canon(label) in near:
                return Proposal(
                    chosen=obj_id, reasoning=f"a {strip_suffix(label)} is usually next to a {goal}"
                )
        return Proposal(chosen=objects[0][0], reasoning="no prior; taking the first object")

    def goal_match(
        self, detections: list[tuple[str, str]], goal: str
    ) -> tuple[str, str] | None:
        goal_tokens = [t for t in goal.lower().split() if t]
        if not goal_tokens:
            return None
        for label, desc in detections:
            if self._goal_hits(goal_tokens, label, desc):
                return (label, desc)
        return None

    def _goal_hits(self, goal_tokens: list[str], label: str, desc: str) -> bool:
        # longest suffix of the goal that names the object; the leading tokens
        # are descriptors that must all appear in the label or description
        label_canon = self._canon(label)
        for split in range(len(goal_tokens)):
            noun = " ".join(goal_tokens[split:])
            if self.tables.canonical(noun) != label_canon:
                continue
            descriptors = goal_tokens[:split]
            haystack = set((label.lower() + " " + desc.lower()).split())
            if all(d in haystack for d in descriptors):
                return True
        return False
