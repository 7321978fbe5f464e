"""Particle filter over layer-2 topologies.

Each particle hypothesises a partition of the observation stream into place
nodes; edges between hypothesised nodes are implicit in consecutive
observations landing in different partition cells.  The proposal favours
well-visited cells near the previous state (a Chinese-restaurant assignment
restricted to a hop radius), the weight update scores how well the newest
observation matches its cell while mismatching rival cells of similar label,
and systematic resampling keeps the ensemble focused.

The filter runs beside the deterministic mapper as a robustness/diagnostics
layer; adopting its estimate is an explicit call (`suggest_merges`), never a
side effect.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph import ObjectFeatures
from .oracle.base import SemanticOracle

logger = logging.getLogger(__name__)

__all__ = [
    "ObsRecord",
    "TopologyParticle",
    "FilterConfig",
    "FilterState",
    "proposal_distribution",
    "propose",
    "likelihood",
    "step",
    "map_estimate",
    "suggest_merges",
    "export_trace",
]


@dataclass(frozen=True)
class ObsRecord:
    place_label: str
    features: ObjectFeatures


@dataclass
class TopologyParticle:
    """One topology hypothesis: cell assignment per observation index."""

    assignments: list[int] = field(default_factory=list)
    weight: float = 1.0

    @property
    def num_nodes(self) -> int:
        return max(self.assignments) + 1 if self.assignments else 0

    @property
    def last_node(self) -> int | None:
        return self.assignments[-1] if self.assignments else None

    def partition(self) -> list[set[int]]:
        cells: list[set[int]] = [set() for _ in range(self.num_nodes)]
        for obs_idx, node in enumerate(self.assignments):
            cells[node].add(obs_idx)
        return cells

    def canonical(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(cell)) for cell in self.partition())

    def adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {n: set() for n in range(self.num_nodes)}
        for prev, cur in zip(self.assignments, self.assignments[1:]):
            if prev != cur:
                adj[prev].add(cur)
                adj[cur].add(prev)
        return adj

    def clone(self) -> "TopologyParticle":
        return TopologyParticle(assignments=list(self.assignments), weight=self.weight)


@dataclass(frozen=True)
class FilterConfig:
    num_particles: int = 100
    alpha: float = 1.0
    radius: int = 2
    resample_threshold: float = 0.5
    # hook for proposal variants that peek at the observation; unused by the
    # stock proposal
    targeted_sampling: bool = False

    def __post_init__(self) -> None:
        if self.num_particles < 1:
            raise ValueError("num_particles must be at least 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


@dataclass
class FilterState:
    config: FilterConfig
    rng: np.random.Generator
    particles: list[TopologyParticle] = field(default_factory=list)
    observations: list[ObsRecord] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)

    @classmethod
    def create(cls, config: FilterConfig, seed: int | np.random.Generator = 0) -> "FilterState":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        particles = [
            TopologyParticle(weight=1.0 / config.num_particles)
            for _ in range(config.num_particles)
        ]
        return cls(config=config, rng=rng, particles=particles)


def _nearby_nodes(particle: TopologyParticle, source: int, radius: int) -> set[int]:
    adj = particle.adjacency()
    seen = {source}
    frontier = deque([(source, 0)])
    while frontier:
        node, depth = frontier.popleft()
        if depth == radius:
            continue
        for nb in adj[node]:
            if nb not in seen:
                seen.add(nb)
                frontier.append((nb, depth + 1))
    return seen


def proposal_distribution(
    particle: TopologyParticle,
    prev_state_node: int | None,
    alpha: float,
    radius: int,
) -> tuple[list[tuple[int, float]], float]:
    """Assignment probabilities over nearby cells plus the new-cell mass.

    Cells within ``radius`` hops of the previous state receive mass
    proportional to their visit count; the concentration ``alpha`` reserves
    mass for opening a fresh cell.
    """
    if prev_state_node is None or not particle.assignments:
        return [], 1.0
    sizes = [0] * particle.num_nodes
    for node in particle.assignments:
        sizes[node] += 1
    reachable = sorted(_nearby_nodes(particle, prev_state_node, radius))
    total = float(sum(sizes[n] for n in reachable))
    denom = total + alpha
    existing = [(n, sizes[n] / denom) for n in reachable]
    return existing, alpha / denom


def propose(
    particle: TopologyParticle,
    prev_state_node: int | None,
    rng: np.random.Generator,
    alpha: float = 1.0,
    radius: int = 2,
) -> int:
    """Sample the next observation's cell and append the assignment."""
    existing, p_new = proposal_distribution(particle, prev_state_node, alpha, radius)
    draw = rng.random()
    acc = 0.0
    chosen: int | None = None
    for node, prob in existing:
        acc += prob
        if draw < acc:
            chosen = node
            break
    if chosen is None:
        chosen = particle.num_nodes  # fresh cell
    particle.assignments.append(chosen)
    return chosen


def _cell_label(particle: TopologyParticle, node: int, observations: list[ObsRecord]) -> str:
    first = min(i for i, n in enumerate(particle.assignments) if n == node)
    return observations[first].place_label


def _cell_features(
    particle: TopologyParticle, node: int, observations: list[ObsRecord]
) -> ObjectFeatures:
    items: list[tuple[str, str]] = []
    for i, n in enumerate(particle.assignments):
        if n != node:
            continue
        for pair in observations[i].features.items:
            if pair not in items:
                items.append(pair)
    return ObjectFeatures(items=tuple(items))


def likelihood(
    obs: ObsRecord,
    particle: TopologyParticle,
    oracle: SemanticOracle,
    observations: list[ObsRecord],
) -> float:
    """P(obs | topology): match the assigned cell, mismatch similar rivals."""
    assigned = particle.last_node
    if assigned is None:
        return 1.0
    p_assigned = oracle.match_place(
        _cell_features(particle, assigned, observations), obs.features
    ).confidence
    labels = [f"{_cell_label(particle, n, observations)}_{n}" for n in range(particle.num_nodes)]
    similar = oracle.similar_labels(obs.place_label, labels)
    value = p_assigned
    for tag in similar:
        node = int(tag.rsplit("_", 1)[1])
        if node == assigned:
            continue
        p_rival = oracle.match_place(
            _cell_features(particle, node, observations), obs.features
        ).confidence
        value *= 1.0 - p_rival
    return value


def step(state: FilterState, obs: ObsRecord, oracle: SemanticOracle) -> FilterState:
    """Advance the filter by one observation: propose, weight, resample."""
    config = state.config
    state.observations.append(obs)
    weights = np.empty(len(state.particles))
    for i, particle in enumerate(state.particles):
        propose(particle, particle.last_node, state.rng, config.alpha, config.radius)
        like = likelihood(obs, particle, oracle, state.observations)
        particle.weight *= like
        weights[i] = particle.weight

    total = weights.sum()
    if total <= 0.0 or not np.isfinite(total):
        logger.warning("all particle weights vanished; resetting to uniform")
        weights[:] = 1.0 / len(weights)
    else:
        weights /= total
    for particle, w in zip(state.particles, weights):
        particle.weight = float(w)

    ess = 1.0 / float(np.sum(weights**2))
    resampled = ess < config.resample_threshold * len(state.particles)
    if resampled:
        _systematic_resample(state, weights)

    best = map_estimate(state)
    top = sorted((p.weight for p in state.particles), reverse=True)[:5]
    state.trace.append(
        {
            "step": len(state.observations) - 1,
            "ess": ess,
            "resampled": resampled,
            "map_size": len(best),
            "top_weights": top,
        }
    )
    return state


def _systematic_resample(state: FilterState, weights: np.ndarray) -> None:
    n = len(state.particles)
    positions = (np.arange(n) + state.rng.random()) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    indexes = np.searchsorted(cumulative, positions)
    fresh = []
    for idx in indexes:
        clone = state.particles[int(idx)].clone()
        clone.weight = 1.0 / n
        fresh.append(clone)
    state.particles = fresh


def map_estimate(state: FilterState) -> list[set[int]]:
    if not state.particles:
        raise ValueError("filter holds no particles")
    best_idx = 0
    best_weight = state.particles[0].weight
    for i, particle in enumerate(state.particles[1:], start=1):
        if particle.weight > best_weight:
            best_weight = particle.weight
            best_idx = i
    return state.particles[best_idx].partition()


def suggest_merges(state: FilterState, place_of_obs: list[str]) -> list[list[str]]:
    """Groups of mapper place ids the MAP topology considers one place.

    ``place_of_obs[i]`` names the place the deterministic mapper assigned to
    observation ``i``.  Only groups spanning more than one mapper place are
    reported; applying them is the caller's decision.
    """
    groups = []
    for cell in map_estimate(state):
        places: list[str] = []
        for idx in sorted(cell):
            if idx < len(place_of_obs) and place_of_obs[idx] not in places:
                places.append(place_of_obs[idx])
        if len(places) > 1:
            groups.append(places)
    return groups


def export_trace(state: FilterState) -> str:
    return "\n".join(json.dumps(rec) for rec in state.trace) + ("\n" if state.trace else "")
