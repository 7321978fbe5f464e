"""Deterministic benchmark assembly: scenes, episodes and the comparison runs.

One protocol object expands into a fixed list of episode specifications, so
the evaluation command and the acceptance suite execute byte-identical
workloads for a given seed, including under process-pool parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..oracle.rules import RuleOracle
from ..schema import Schema
from .baselines import baseline_greedy_frontier, baseline_random
from .episode import EpisodeResult, EpisodeSpec, RunnerConfig, run_episode
from .noise import NoiseModel, default_noise
from .scene import generate_home_scene

__all__ = ["BenchmarkProtocol", "build_episodes", "run_agent_episode", "GOAL_CATEGORIES"]

# common object categories, in the spirit of standard object-goal benchmarks
GOAL_CATEGORIES: list[str] = [
    "bed", "sofa", "tv", "toilet", "sink", "fridge", "oven", "desk", "computer",
    "dining table", "bathtub", "wardrobe", "mirror", "plant", "guitar",
]


@dataclass(frozen=True)
class BenchmarkProtocol:
    num_scenes: int = 20
    episodes_per_scene: int = 10
    scene_seed: int = 2500
    episode_seed: int = 31337
    horizon_factor: int = 2
    horizon_slack: int = 4
    goals: tuple[str, ...] = tuple(GOAL_CATEGORIES)

    @property
    def num_episodes(self) -> int:
        return self.num_scenes * self.episodes_per_scene


def build_episodes(protocol: BenchmarkProtocol) -> list[EpisodeSpec]:
    """Expand the protocol into per-episode specs, fully determined by seeds."""
    rng = np.random.default_rng(protocol.episode_seed)
    specs: list[EpisodeSpec] = []
    for s in range(protocol.num_scenes):
        scene = generate_home_scene(np.random.default_rng(protocol.scene_seed + s))
        labels = sorted({o.label for p in scene.places.values() for o in p.objects})
        usable = [g for g in protocol.goals if g in labels]
        places = list(scene.places)
        for _ in range(protocol.episodes_per_scene):
            goal = usable[int(rng.integers(len(usable)))]
            hosts = scene.hosts(goal)
            start = places[0]
            for _ in range(30):
                start = places[int(rng.integers(len(places)))]
                if start not in hosts:
                    break
            shortest = scene.shortest_hops(start, hosts)
            horizon = int(
                protocol.horizon_factor * max(shortest, 1) + protocol.horizon_slack
            )
            specs.append(
                EpisodeSpec(
                    scene=scene,
                    start=start,
                    goal=goal,
                    horizon=horizon,
                    seed=int(rng.integers(1 << 31)),
                )
            )
    return specs


def run_agent_episode(
    spec: EpisodeSpec,
    schema: Schema,
    noise: NoiseModel | None = None,
    use_filter: bool = False,
) -> dict[str, EpisodeResult]:
    """Run the full agent plus both reference walkers on one episode."""
    noise = noise if noise is not None else default_noise()
    config = RunnerConfig(noise=noise, use_filter=use_filter)
    return {
        "full": run_episode(spec, schema, RuleOracle(), config),
        "random": baseline_random(spec, noise),
        "frontier": baseline_greedy_frontier(spec, noise),
    }
