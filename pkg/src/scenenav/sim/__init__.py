from .baselines import baseline_greedy_frontier, baseline_random
from .episode import (
    ActResult,
    EpisodeResult,
    EpisodeSpec,
    Metrics,
    RunnerConfig,
    act,
    cover_walk,
    metrics,
    observe,
    run_episode,
    walk_to_frames,
)
from .eval import LayerQuality, layer2_quality
from .noise import NoiseModel, default_noise, noiseless
from .scene import (
    GroundTruthScene,
    SceneConnector,
    SceneObject,
    ScenePlace,
    SceneRegion,
    generate_home_scene,
    generate_market_scene,
    scene_from_json,
    scene_to_json,
    validate_scene,
)

__all__ = [
    "ActResult",
    "EpisodeResult",
    "EpisodeSpec",
    "GroundTruthScene",
    "LayerQuality",
    "Metrics",
    "NoiseModel",
    "RunnerConfig",
    "SceneConnector",
    "SceneObject",
    "ScenePlace",
    "SceneRegion",
    "act",
    "baseline_greedy_frontier",
    "baseline_random",
    "cover_walk",
    "default_noise",
    "generate_home_scene",
    "generate_market_scene",
    "layer2_quality",
    "metrics",
    "noiseless",
    "observe",
    "run_episode",
    "scene_from_json",
    "scene_to_json",
    "validate_scene",
    "walk_to_frames",
]
