"""Observation noise for the discrete world: dropouts, synonym swaps, mislabels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..oracle.tables import DEFAULT_SYNONYM_GROUPS

__all__ = ["NoiseModel", "noiseless", "default_noise"]

# place labels the stock confusion table may swap within
_PLACE_GROUPS = [
    ["livingroom", "familyroom", "lounge"],
    ["bedroom", "guestroom"],
    ["kitchen", "kitchenette"],
    ["bathroom", "washroom"],
    ["hallway", "hall"],
    ["office", "study"],
]


@dataclass
class NoiseModel:
    """Seed-deterministic corruption applied when a frame is rendered."""

    detect_recall: float = 1.0
    synonym_rate: float = 0.0
    place_confusion: dict[str, list[tuple[str, float]]] = field(default_factory=dict)
    seed: int = 0
    synonym_groups: list[list[str]] = field(default_factory=lambda: [list(g) for g in DEFAULT_SYNONYM_GROUPS])

    def __post_init__(self) -> None:
        if not 0.0 <= self.detect_recall <= 1.0:
            raise ValueError("detect_recall must lie in [0, 1]")
        if not 0.0 <= self.synonym_rate <= 1.0:
            raise ValueError("synonym_rate must lie in [0, 1]")
        self._peers: dict[str, list[str]] = {}
        for group in self.synonym_groups:
            for label in group:
                peers = [l for l in group if l != label]
                if peers:
                    self._peers[label.lower()] = peers

    def detected(self, rng: np.random.Generator) -> bool:
        return bool(rng.random() < self.detect_recall)

    def observe_label(self, label: str, rng: np.random.Generator) -> str:
        peers = self._peers.get(label.lower())
        if peers and rng.random() < self.synonym_rate:
            return peers[int(rng.integers(len(peers)))]
        return label

    def confuse_place(self, label: str, rng: np.random.Generator) -> str:
        rows = self.place_confusion.get(label.lower())
        if not rows:
            return label
        draw = rng.random()
        acc = 0.0
        for alt, prob in rows:
            acc += prob
            if draw < acc:
                return alt
        return label


def noiseless() -> NoiseModel:
    return NoiseModel(detect_recall=1.0, synonym_rate=0.0)


def default_noise(seed: int = 0) -> NoiseModel:
    """The stock acceptance setting: 10% dropouts, swaps and mislabels."""
    confusion: dict[str, list[tuple[str, float]]] = {}
    for group in _PLACE_GROUPS:
        for label in group:
            alts = [g for g in group if g != label]
            share = 0.1 / len(alts)
            confusion[label] = [(alt, share) for alt in alts]
    return NoiseModel(
        detect_recall=0.9,
        synonym_rate=0.1,
        place_confusion=confusion,
        seed=seed,
    )
