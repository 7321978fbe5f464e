"""Command-line entry points: verify, generate, replay-map and evaluate.

Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 remote-backend
failure.  Output files are written to a temporary sibling and renamed into
place, so a failing command never leaves a partial artifact behind.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import logging
import os
import sys
import tempfile

import numpy as np

from .graph import SceneGraph
from .mapper import MapperConfig, MapperState, frames_from_jsonl, mapper_step
from .oracle.base import OracleError
from .oracle.remote import RemoteChatOracle, RemoteConfig
from .oracle.rules import RuleOracle
from .schema import Schema, SchemaParseError, parse_schema, serialize_schema, verify_schema
from .schemagen import builtin_mock_backend, load_mock_backend, run_pipeline, trace_to_json
from .sim.baselines import baseline_greedy_frontier, baseline_random
from .sim.episode import EpisodeResult, EpisodeSpec, RunnerConfig, metrics, run_episode
from .sim.noise import NoiseModel, noiseless
from .sim.protocol import GOAL_CATEGORIES, BenchmarkProtocol, build_episodes
from .sim.scene import scene_from_json
from .topofilter import FilterConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_REMOTE = 3

_PLACE_GROUPS = [
    ["livingroom", "familyroom", "lounge"],
    ["bedroom", "guestroom"],
    ["kitchen", "kitchenette"],
    ["bathroom", "washroom"],
    ["hallway", "hall"],
    ["office", "study"],
]


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _load_schema(path: str) -> Schema:
    return parse_schema(_read(path))


def cmd_verify_schema(args: argparse.Namespace) -> int:
    try:
        schema = _load_schema(args.schema)
    except OSError as exc:
        print(f"cannot read schema: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemaParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = verify_schema(schema)
    if report.valid:
        print(f"{args.schema}: valid ({len(schema.concepts)} concepts, "
              f"{schema.num_layers} layers)")
        return EXIT_OK
    print(report.text(), file=sys.stderr)
    return EXIT_INVALID


def _make_backend(spec: str):
    if spec.startswith("mock:"):
        name = spec[len("mock:"):]
        if os.path.exists(name):
            return load_mock_backend(name)
        return builtin_mock_backend(name)
    if spec == "remote":
        return RemoteChatOracle(RemoteConfig.from_env())
    if spec.startswith("remote:"):
        return RemoteChatOracle(RemoteConfig.from_file(spec[len("remote:"):]))
    raise ValueError(f"unknown backend {spec!r}; use mock:<name|path> or remote[:config]")


def cmd_gen_schema(args: argparse.Namespace) -> int:
    try:
        backend = _make_backend(args.backend)
    except (OSError, KeyError) as exc:
        print(f"cannot set up backend: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    try:
        trace = run_pipeline(args.env, backend, max_iterations=args.max_iterations)
    except OracleError as exc:
        print(f"remote backend failed: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    if args.trace:
        _atomic_write(args.trace, trace_to_json(trace))
    if not trace.succeeded:
        last = trace.iterations[-1].report.text() if trace.iterations else "no iterations"
        print(f"no valid schema within {args.max_iterations} iteration(s):\n{last}",
              file=sys.stderr)
        return EXIT_INVALID
    _atomic_write(args.out, serialize_schema(trace.final))
    print(f"wrote {args.out} after {len(trace.iterations)} iteration(s)")
    return EXIT_OK


def cmd_map(args: argparse.Namespace) -> int:
    try:
        schema = _load_schema(args.schema)
        log_text = _read(args.log)
    except OSError as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemaParseError as exc:
        print(f"schema parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = verify_schema(schema)
    if not report.valid:
        print(report.text(), file=sys.stderr)
        return EXIT_INVALID
    try:
        frames = frames_from_jsonl(log_text)
    except (ValueError, KeyError) as exc:
        print(f"trajectory log parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    oracle = RuleOracle()
    state = MapperState(graph=SceneGraph(schema))
    config = MapperConfig(
        beta_pix=args.beta_pix, beta_iou=args.beta_iou, min_obj_area=args.min_obj_area
    )
    for frame in frames:
        before = state.current_place
        state = mapper_step(frame, schema, state, oracle, config).state
        logger.info(
            "frame %s: %s -> %s", frame.frame_id, before or "(start)", state.current_place
        )
    _atomic_write(args.out, state.graph.export(args.format))
    print(
        f"wrote {args.out}: {len(state.graph.nodes())} nodes, "
        f"{len(state.graph.edges())} edges from {len(frames)} frames"
    )
    return EXIT_OK


def _build_noise(args: argparse.Namespace) -> NoiseModel:
    if args.noiseless:
        return noiseless()
    confusion: dict[str, list[tuple[str, float]]] = {}
    if args.confusion > 0:
        for group in _PLACE_GROUPS:
            for label in group:
                alts = [g for g in group if g != label]
                confusion[label] = [(alt, args.confusion / len(alts)) for alt in alts]
    return NoiseModel(
        detect_recall=args.recall,
        synonym_rate=args.synonym,
        place_confusion=confusion,
    )


def _episode_worker(payload: tuple) -> tuple[int, str, EpisodeResult]:
    index, agent, spec, schema, noise, use_filter, particles = payload
    if agent == "full":
        config = RunnerConfig(
            noise=noise,
            use_filter=use_filter,
            filter_config=FilterConfig(num_particles=particles) if use_filter else FilterConfig(),
        )
        return index, agent, run_episode(spec, schema, RuleOracle(), config)
    if agent == "random":
        return index, agent, baseline_random(spec, noise)
    return index, agent, baseline_greedy_frontier(spec, noise)


def _format_row(agent: str, episode: str, result: EpisodeResult) -> str:
    def num(value: float) -> str:
        return f"{value:.6f}"

    spl = 0.0
    if result.success:
        spl = 1.0 if result.hops_traversed == 0 else (
            result.shortest_hops / max(result.hops_traversed, result.shortest_hops)
        )
    return ",".join(
        [
            agent,
            episode,
            "1" if result.success else "0",
            num(spl),
            str(result.hops_traversed),
            num(result.shortest_hops),
            num(result.final_goal_distance),
        ]
    )


def cmd_run(args: argparse.Namespace) -> int:
    try:
        schema = _load_schema(args.schema)
    except OSError as exc:
        print(f"cannot read schema: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemaParseError as exc:
        print(f"schema parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.backend != "rule":
        print("episode evaluation currently runs on the rule backend only",
              file=sys.stderr)
        return EXIT_INVALID

    noise = _build_noise(args)
    if args.scene:
        try:
            scene = scene_from_json(_read(args.scene))
        except OSError as exc:
            print(f"cannot read scene: {exc}", file=sys.stderr)
            return EXIT_IO
        specs = _episodes_on_scene(scene, args)
    else:
        protocol = BenchmarkProtocol(
            num_scenes=args.scenes,
            episodes_per_scene=max(1, args.episodes // max(args.scenes, 1)),
            scene_seed=args.scene_seed,
            episode_seed=args.seed,
            horizon_factor=args.horizon_factor,
            horizon_slack=args.horizon_slack,
        )
        specs = build_episodes(protocol)
    if not specs:
        print("no episodes to run", file=sys.stderr)
        return EXIT_INVALID

    agents = ["full"] + (["random", "frontier"] if args.baseline else [])
    jobs = []
    for agent in agents:
        for index, spec in enumerate(specs):
            jobs.append((index, agent, spec, schema, noise, args.particles > 0, args.particles))

    results: dict[tuple[str, int], EpisodeResult] = {}
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for index, agent, result in pool.map(_episode_worker, jobs, chunksize=4):
                results[(agent, index)] = result
    else:
        for payload in jobs:
            index, agent, result = _episode_worker(payload)
            results[(agent, index)] = result

    lines = ["agent,episode,success,spl,p,l,dtg"]
    for agent in agents:
        per_agent = [results[(agent, i)] for i in range(len(specs))]
        for i, result in enumerate(per_agent):
            lines.append(_format_row(agent, str(i), result))
        summary = metrics(per_agent)
        mean_p = sum(r.hops_traversed for r in per_agent) / len(per_agent)
        mean_l = sum(r.shortest_hops for r in per_agent) / len(per_agent)
        lines.append(
            ",".join(
                [
                    agent,
                    "aggregate",
                    f"{summary.sr:.6f}",
                    f"{summary.spl:.6f}",
                    f"{mean_p:.6f}",
                    f"{mean_l:.6f}",
                    f"{summary.dtg:.6f}",
                ]
            )
        )
    _atomic_write(args.out, "\n".join(lines) + "\n")
    print(f"wrote {args.out}: {len(specs)} episodes x {len(agents)} agent(s)")
    return EXIT_OK


def _episodes_on_scene(scene, args: argparse.Namespace) -> list[EpisodeSpec]:
    rng = np.random.default_rng(args.seed)
    labels = sorted({o.label for p in scene.places.values() for o in p.objects})
    usable = [g for g in (args.goal.split(",") if args.goal else GOAL_CATEGORIES) if g in labels]
    if not usable:
        usable = labels
    places = list(scene.places)
    specs = []
    for _ in range(args.episodes):
        goal = usable[int(rng.integers(len(usable)))]
        hosts = scene.hosts(goal)
        start = places[0]
        for _ in range(30):
            start = places[int(rng.integers(len(places)))]
            if start not in hosts:
                break
        shortest = scene.shortest_hops(start, hosts)
        horizon = int(args.horizon_factor * max(shortest, 1) + args.horizon_slack)
        specs.append(
            EpisodeSpec(
                scene=scene, start=start, goal=goal, horizon=horizon,
                seed=int(rng.integers(1 << 31)),
            )
        )
    return specs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenenav",
        description="Schema-driven scene-graph mapping and object-goal search.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-schema", help="check a schema file against the structural rules")
    p.add_argument("schema")
    p.set_defaults(func=cmd_verify_schema)

    p = sub.add_parser("gen-schema", help="generate a schema from an environment label")
    p.add_argument("env")
    p.add_argument("--backend", default="mock:home",
                   help="mock:<name|path> or remote[:config.json]")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default="")
    p.add_argument("--max-iterations", type=int, default=3)
    p.set_defaults(func=cmd_gen_schema)

    p = sub.add_parser("map", help="replay a trajectory log into a scene graph")
    p.add_argument("--log", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["structured", "dot"], default="structured")
    p.add_argument("--beta-pix", type=float, default=100.0)
    p.add_argument("--beta-iou", type=float, default=0.1)
    p.add_argument("--min-obj-area", type=float, default=200.0)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("run", help="evaluate episodes and write a metrics CSV")
    p.add_argument("--schema", required=True)
    p.add_argument("--scene", default="", help="scene file; omit to generate scenes")
    p.add_argument("--scenes", type=int, default=20, help="number of generated scenes")
    p.add_argument("--scene-seed", type=int, default=2500)
    p.add_argument("--episodes", type=int, default=200)
    p.add_argument("--seed", type=int, default=31337)
    p.add_argument("--goal", default="", help="comma-separated goal list")
    p.add_argument("--backend", choices=["rule", "remote"], default="rule")
    p.add_argument("--baseline", action="store_true", help="also run reference walkers")
    p.add_argument("--particles", type=int, default=0,
                   help="enable the topology filter with this many particles")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--recall", type=float, default=0.9)
    p.add_argument("--synonym", type=float, default=0.1)
    p.add_argument("--confusion", type=float, default=0.1)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--horizon-factor", type=int, default=2)
    p.add_argument("--horizon-slack", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except OracleError as exc:
        print(f"remote backend failure: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
