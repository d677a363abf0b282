"""Per-step orchestration of the navigation loop.

Each step runs the four stages in a fixed order: prompt engineering (scene
description, experience retrieval, candidate pruning, visual prompt),
position estimation, action selection, and action execution (delegated to
the simulator by :func:`run`).  Ablation flags disable individual stages
the way the evaluation suite expects.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import simulator
from .errors import BackendUnavailable, EmptyMask
from .memory import ExperienceStore
from .perception import Observation, annotate_view, assign_quadrants, detect_turns
from .prompting import NavPlan, generate_plan, render_svap
from .reasoning import ReasoningBackend, ReasoningContext
from .sketchmap import HandDrawnMap
from .simulator import GridWorld, RobotPose, execute, observe
from .topomap import (
    NO_ACTION,
    PruneParams,
    TopoMap,
    build,
    graph_distance,
    integrate_predictions,
    mark_junctions,
    prune,
)

RUNNING = "running"
SUCCEEDED = "succeeded"
FAILED = "failed"
ABORTED = "aborted"


@dataclass(frozen=True)
class AblationFlags:
    """Stage switches mirroring the evaluation variants."""

    no_ldict: bool = False
    no_predicted_landmarks: bool = False
    no_pruning: bool = False
    no_experience: bool = False

    NAMES = ("no_ldict", "no_predicted_landmarks", "no_pruning", "no_experience")
    ALIASES = {
        "no_em": "no_experience",
        "no_pred": "no_predicted_landmarks",
        "no_mtp": "no_pruning",
    }

    @classmethod
    def from_names(cls, names: "list[str] | str") -> "AblationFlags":
        if isinstance(names, str):
            names = [n for n in names.split(",") if n.strip()]
        kwargs = {}
        for name in names:
            key = name.strip().lower()
            key = cls.ALIASES.get(key, key)
            if key in ("", "full", "none"):
                continue
            if key not in cls.NAMES:
                raise ValueError(f"unknown ablation {name!r}; known: "
                                 f"{list(cls.NAMES) + sorted(cls.ALIASES)}")
            kwargs[key] = True
        return cls(**kwargs)

    def label(self) -> str:
        active = [n for n in self.NAMES if getattr(self, n)]
        return "+".join(active) if active else "full"


@dataclass(frozen=True)
class PipelineConfig:
    node_interval: "float | None" = None   # None: drawing diagonal / 20
    angle_threshold_deg: float = 30.0
    prune_params: PruneParams = field(default_factory=PruneParams)
    goal_tolerance_hops: int = 1
    max_steps: "int | None" = None         # None: 4 x chain length
    fov_degrees: float = simulator.DEFAULT_FOV_DEG
    range_cells: float = simulator.DEFAULT_RANGE_CELLS
    stride: int = 1
    save_images: bool = True
    deterministic: bool = False
    spl_ref: str = "shortest"


def suggested_node_interval(hmap: HandDrawnMap, world: GridWorld) -> float:
    """Node spacing that keeps roughly one robot node per world path cell.

    Belief updates advance at most one chain hop per step, so denser node
    spacing than the robot's per-step progress makes the position estimate
    fall behind; divide the sketched path length by the world's path hop
    count so both move at the same rate.
    """
    from .sketchmap import path_length

    cells = simulator.shortest_path(world)
    hops = max(len(cells) - 1, 1) if cells else 1
    return max(path_length(hmap.path) / hops, 1.0)


@dataclass
class EpisodeState:
    hmap: HandDrawnMap
    topo: TopoMap
    plan: NavPlan
    store: ExperienceStore
    backend: ReasoningBackend
    flags: AblationFlags
    config: PipelineConfig
    prev_position: "int | None"
    prev_action: str
    t: int = 0
    status: str = RUNNING
    max_steps: int = 0


@dataclass
class StepTrace:
    t: int
    observed_labels: list
    observed_turns: list
    scene_description: str
    retrieved_step: "int | None"
    retrieved_similarity: "float | None"
    candidate_ids: list
    localization_scores: dict
    estimated_position: int
    action_scores: dict
    action: str
    latency_s: float = 0.0
    advance_cells: int = 0
    svap_path: "str | None" = None
    svap_image: "np.ndarray | None" = None

    def to_record(self) -> dict:
        record = {k: v for k, v in dataclasses.asdict(self).items() if k != "svap_image"}
        record["localization_scores"] = {str(k): round(v, 6)
                                         for k, v in self.localization_scores.items()}
        record["action_scores"] = {str(k): round(v, 6) for k, v in self.action_scores.items()}
        record["latency_s"] = round(self.latency_s, 6)
        if self.retrieved_similarity is not None:
            record["retrieved_similarity"] = round(self.retrieved_similarity, 6)
        return record


@dataclass
class EpisodeTrace:
    world_name: str
    backend_id: str
    flags_label: str
    seed: int
    steps: int = 0
    records: list = field(default_factory=list)
    poses: list = field(default_factory=list)  # (floor, col, row, heading) per step
    status: str = RUNNING
    traveled_cells: float = 0.0
    terminal_pose: "RobotPose | None" = None
    backend_latency_s: float = 0.0

    def write(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "trace.jsonl"
        header = {
            "world": self.world_name, "backend": self.backend_id,
            "flags": self.flags_label, "seed": self.seed, "status": self.status,
            "steps": self.steps, "traveled_cells": self.traveled_cells,
            "backend_latency_s": round(self.backend_latency_s, 6),
        }
        with open(path, "w") as fh:
            fh.write(json.dumps({"episode": header}, sort_keys=True) + "\n")
            for record in self.records:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        return path


def init_episode(hmap: HandDrawnMap, backend: ReasoningBackend, flags: AblationFlags,
                 config: PipelineConfig) -> EpisodeState:
    """Build the topological map and navigation plan, run the upfront
    landmark prediction (unless ablated), and seat the loop at the start."""
    topo = build(hmap, node_interval=config.node_interval)
    topo = mark_junctions(topo, config.angle_threshold_deg)
    if not flags.no_predicted_landmarks:
        predictions = backend.predict_landmarks(hmap.drawing, topo)
        topo = integrate_predictions(topo, predictions)
    plan = generate_plan(topo)
    max_steps = config.max_steps if config.max_steps is not None else 4 * len(topo.robot_nodes)
    return EpisodeState(
        hmap=hmap, topo=topo, plan=plan, store=ExperienceStore(),
        backend=backend, flags=flags, config=config,
        prev_position=topo.start_id, prev_action=NO_ACTION,
        max_steps=max_steps,
    )


def step(state: EpisodeState, observation: Observation) -> tuple[str, EpisodeState, StepTrace]:
    """Run one full loop iteration on an observation.

    Returns the chosen action, the advanced state (same object, mutated),
    and the step trace.  A backend outage aborts the episode instead of
    raising.
    """
    if state.status != RUNNING:
        raise RuntimeError(f"episode is {state.status}, not running")
    flags, config, backend = state.flags, state.config, state.backend

    if observation.mask is not None and not observation.turns:
        try:
            turns = tuple(detect_turns(observation.mask))
        except EmptyMask:
            turns = ()
        observation = replace(observation, turns=turns)

    start_latency = backend.total_latency_s
    try:
        entries = [] if flags.no_ldict else assign_quadrants(observation)
        scene = backend.describe_scene(observation.view_image, entries)

        retrieved = None if flags.no_experience else state.store.retrieve(scene)
        experience = retrieved[0] if retrieved else None

        pruned = prune(state.topo, state.prev_position, state.prev_action,
                       config.prune_params, bypass=flags.no_pruning)
        view = observation.view_image
        if view is None:
            view = np.full((observation.height, observation.width, 3), 245, dtype=np.uint8)
        annotated = annotate_view(view, observation.objects, observation.turns)
        svap = render_svap(annotated, state.hmap.drawing, pruned)

        context = ReasoningContext(
            scene_description=scene,
            prev_position=state.prev_position,
            prev_action=state.prev_action,
            plan=state.plan,
            candidates=tuple(sorted(svap.candidate_ids)),
            experience=experience,
        )
        estimated, loc_scores = backend.localize(svap, context, observation, state.topo)
        action, act_scores = backend.select_action(svap, context, estimated, state.topo)
    except BackendUnavailable:
        state.status = ABORTED
        trace = StepTrace(
            t=state.t, observed_labels=[o.label for o in observation.objects],
            observed_turns=[t.direction for t in observation.turns],
            scene_description="", retrieved_step=None, retrieved_similarity=None,
            candidate_ids=[], localization_scores={}, estimated_position=-1,
            action_scores={}, action="stop",
        )
        return "stop", state, trace

    state.store.record(state.store.make_experience(state.t, scene, estimated, action))

    latency = 0.0 if config.deterministic else backend.total_latency_s - start_latency
    trace = StepTrace(
        t=state.t,
        observed_labels=[o.label for o in observation.objects],
        observed_turns=[t.direction for t in observation.turns],
        scene_description=scene,
        retrieved_step=retrieved[0].step if retrieved else None,
        retrieved_similarity=retrieved[1] if retrieved else None,
        candidate_ids=sorted(svap.candidate_ids),
        localization_scores=loc_scores,
        estimated_position=estimated,
        action_scores=act_scores,
        action=action,
        latency_s=latency,
        svap_image=svap.raster,
    )

    state.prev_position = estimated
    state.prev_action = action
    state.t += 1

    if action == "stop":
        hops = graph_distance(state.topo, estimated, state.topo.goal_id)
        state.status = SUCCEEDED if hops <= config.goal_tolerance_hops else FAILED
    elif state.t >= state.max_steps:
        state.status = ABORTED
    return action, state, trace


class EpisodeSession:
    """One closed-loop episode, advanced a step at a time.

    Used whole by :func:`run` and stepwise by the serve-mode API.  Visual
    prompt PNGs are kept per step so they stay retrievable after the
    episode ends.
    """

    def __init__(self, hmap: HandDrawnMap, world: GridWorld, backend: ReasoningBackend,
                 flags: AblationFlags = AblationFlags(), seed: int = 0,
                 config: "PipelineConfig | None" = None):
        if config is None:
            config = PipelineConfig()
        if config.node_interval is None:
            config = replace(config, node_interval=suggested_node_interval(hmap, world))
        self.world = world
        self.config = config
        self.state = init_episode(hmap, backend, flags, config)
        self.pose = RobotPose(cell=world.start, heading=world.start_heading,
                              floor=world.start_floor)
        self.trace = EpisodeTrace(world_name=world.name, backend_id=backend.backend_id,
                                  flags_label=flags.label(), seed=seed)
        self.svap_images: list[np.ndarray] = []
        if self.state.max_steps <= 0:
            self.state.status = ABORTED

    @property
    def done(self) -> bool:
        return self.state.status != RUNNING

    def advance(self) -> "StepTrace | None":
        """Run one observe -> step -> execute iteration; None when done."""
        if self.done:
            return None
        observation = observe(self.world, self.pose, self.config.fov_degrees,
                              self.config.range_cells)
        action, _, step_trace = step(self.state, observation)
        result = execute(self.world, self.pose, action, self.config.stride)
        self.pose = result.pose
        step_trace.advance_cells = result.advance_cells
        self.trace.traveled_cells += result.advance_cells
        if self.config.save_images and step_trace.svap_image is not None:
            self.svap_images.append(step_trace.svap_image)
        self.trace.records.append(step_trace.to_record())
        self.trace.poses.append((self.pose.floor, self.pose.cell[0], self.pose.cell[1],
                                 self.pose.heading))
        return step_trace

    def finalize(self, out_dir: "Path | str | None" = None) -> tuple[EpisodeTrace, simulator.Metrics]:
        trace, config, state = self.trace, self.config, self.state
        trace.status = state.status
        trace.steps = state.t
        trace.terminal_pose = self.pose
        trace.backend_latency_s = (0.0 if config.deterministic
                                   else state.backend.total_latency_s)

        sketch_ref_m = None
        if config.spl_ref == "sketch":
            from .sketchmap import path_length

            px_per_cell = suggested_node_interval(state.hmap, self.world)
            sketch_ref_m = path_length(state.hmap.path) / px_per_cell * self.world.cell_size
        episode_metrics = simulator.metrics(trace, self.world, spl_ref=config.spl_ref,
                                            sketch_ref_m=sketch_ref_m)
        if out_dir is not None:
            out_path = Path(out_dir)
            if config.save_images:
                (out_path / "svap").mkdir(parents=True, exist_ok=True)
                for t, image in enumerate(self.svap_images):
                    svap_file = out_path / "svap" / f"{t}.png"
                    Image.fromarray(image).save(svap_file)
                    if t < len(trace.records):
                        trace.records[t]["svap_path"] = str(svap_file.relative_to(out_path))
            trace.write(out_path)
            (out_path / "metrics.json").write_text(json.dumps({
                "success": episode_metrics.success,
                "spl": round(episode_metrics.spl, 6),
                "distance_m": round(episode_metrics.distance_m, 6),
                "steps": episode_metrics.steps,
                "backend_latency_s": round(episode_metrics.backend_latency_s, 6),
            }, indent=2, sort_keys=True))
        return trace, episode_metrics


def run(hmap: HandDrawnMap, world: GridWorld, backend: ReasoningBackend,
        flags: AblationFlags = AblationFlags(), seed: int = 0,
        config: "PipelineConfig | None" = None,
        out_dir: "Path | str | None" = None) -> tuple[EpisodeTrace, simulator.Metrics]:
    """Run a full closed-loop episode of observe -> step -> execute.

    The seed is recorded in the trace (the loop itself is deterministic);
    the trace file and per-step visual prompts are written under
    ``out_dir`` when given.
    """
    session = EpisodeSession(hmap, world, backend, flags, seed, config)
    while not session.done:
        session.advance()
    return session.finalize(out_dir)
