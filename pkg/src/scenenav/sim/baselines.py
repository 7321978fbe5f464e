"""Mapless reference agents: uniform random walk and nearest-unvisited sweep.

Both run under the same observation noise as the full agent: standing in the
goal's place only counts once the goal is actually detected there.
"""

from __future__ import annotations

import numpy as np

from ..oracle.tables import default_tables
from .episode import EpisodeResult, EpisodeSpec
from .noise import NoiseModel, noiseless
from .scene import GroundTruthScene

__all__ = ["baseline_random", "baseline_greedy_frontier"]


def _canon():
    return default_tables().canonical


def _finish(spec: EpisodeSpec, place: str, hops: int, success: bool, hosts: list[str],
            shortest: float) -> EpisodeResult:
    dtg = 0.0 if success else (spec.scene.shortest_hops(place, hosts) if hosts else float("inf"))
    return EpisodeResult(
        success=success,
        hops_traversed=hops,
        shortest_hops=shortest,
        final_goal_distance=dtg,
        failure=None if success else "horizon exhausted",
    )


def _goal_seen(place: str, hosts: list[str], noise: NoiseModel, rng: np.random.Generator) -> bool:
    return place in hosts and noise.detected(rng)


def baseline_random(
    spec: EpisodeSpec,
    noise: NoiseModel | None = None,
    rng: np.random.Generator | None = None,
) -> EpisodeResult:
    """Move to a uniformly random adjacent place each step."""
    noise = noise if noise is not None else noiseless()
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    hosts = spec.scene.hosts(spec.goal, _canon())
    shortest = spec.scene.shortest_hops(spec.start, hosts) if hosts else float("inf")
    place = spec.start
    hops = 0
    if _goal_seen(place, hosts, noise, rng):
        return _finish(spec, place, 0, True, hosts, shortest)
    for _ in range(spec.horizon):
        neighbors = [nb for nb, _ in spec.scene.neighbors(place)]
        if not neighbors:
            break
        place = neighbors[int(rng.integers(len(neighbors)))]
        hops += 1
        if _goal_seen(place, hosts, noise, rng):
            return _finish(spec, place, hops, True, hosts, shortest)
    return _finish(spec, place, hops, False, hosts, shortest)


def baseline_greedy_frontier(
    spec: EpisodeSpec,
    noise: NoiseModel | None = None,
    rng: np.random.Generator | None = None,
) -> EpisodeResult:
    """Always walk to the nearest place not yet visited.

    Routing stays inside known space: the sweep may only cross territory it
    has already covered, stepping one hop beyond it onto the frontier.
    """
    noise = noise if noise is not None else noiseless()
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    hosts = spec.scene.hosts(spec.goal, _canon())
    shortest = spec.scene.shortest_hops(spec.start, hosts) if hosts else float("inf")
    place = spec.start
    visited = {place}
    hops = 0
    if _goal_seen(place, hosts, noise, rng):
        return _finish(spec, place, 0, True, hosts, shortest)
    while hops < spec.horizon:
        path = _path_to_nearest_frontier(spec.scene, place, visited)
        if path is None:
            break
        for nxt in path:
            place = nxt
            visited.add(place)
            hops += 1
            if _goal_seen(place, hosts, noise, rng):
                return _finish(spec, place, hops, True, hosts, shortest)
            if hops >= spec.horizon:
                break
    return _finish(spec, place, hops, False, hosts, shortest)


def _path_to_nearest_frontier(
    scene: GroundTruthScene, start: str, visited: set[str]
) -> list[str] | None:
    """Shortest route through visited places to the closest unvisited one."""
    prev = {start: start}
    queue = [start]
    best: str | None = None
    while queue and best is None:
        node = queue.pop(0)
        for nb, _ in scene.neighbors(node):
            if nb in prev:
                continue
            prev[nb] = node
            if nb not in visited:
                best = nb
                break
            queue.append(nb)
    if best is None:
        return None
    path = [best]
    while path[-1] != start:
        path.append(prev[path[-1]])
    path.reverse()
    return path[1:]
