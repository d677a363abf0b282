"""Prompt artifacts: the two-pane visual prompt image, the templated
navigation plan, localization/action text prompts, and robust parsing of
probability-scored responses.

System and user prompt texts live as golden files under ``prompts/`` with
``{placeholder}`` slots, so prompt output is reproducible byte for byte.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np
from PIL import Image, ImageDraw

from .errors import AllZero, EmptyCandidateSet, Unparseable
from .topomap import ACTIONS, Segment, TopoMap, segment_by_junctions

logger = logging.getLogger(__name__)

NODE_COLOR = (128, 0, 128)       # purple discs and chain edges
NODE_RADIUS = 9
LANDMARK_TEXT_COLOR = (40, 40, 120)
PREDICTED_MARKER = "(expected)"

_PROMPT_CACHE: dict[str, str] = {}


def _prompt_text(name: str) -> str:
    if name not in _PROMPT_CACHE:
        _PROMPT_CACHE[name] = (
            resources.files("hamnav.prompts").joinpath(name).read_text(encoding="utf-8")
        )
    return _PROMPT_CACHE[name]


@dataclass(frozen=True)
class SvapImage:
    """Side-by-side visual prompt: annotated camera view | map overlay."""

    raster: np.ndarray  # (H, W, 3) uint8
    candidate_ids: tuple[int, ...]
    view_width: int
    map_width: int


@dataclass(frozen=True)
class NavPlan:
    sentences: tuple[str, ...]
    full_text: str


@dataclass(frozen=True)
class PromptPacket:
    system_text: str
    user_text: str
    expected_schema: str  # localization | action | description | prediction
    image: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.user_text:
            raise ValueError("user_text must be non-empty")


@dataclass(frozen=True)
class ScoredResponse:
    scores: dict  # answer -> probability (renormalized to sum 1)
    chosen: object
    raw_text: str


def render_svap(annotated_view: np.ndarray, map_image: np.ndarray,
                pruned_topo: TopoMap) -> SvapImage:
    """Compose the visual prompt: annotated view left, map overlay right.

    The map pane shows retained robot nodes as numbered purple discs, chain
    edges as purple lines, and landmark labels at their drawn positions.

    Raises:
        EmptyCandidateSet: if the pruned map has no robot nodes.
    """
    if not pruned_topo.robot_nodes:
        raise EmptyCandidateSet("pruned map has no robot nodes to render")

    view = np.asarray(annotated_view, dtype=np.uint8)
    vh, vw = view.shape[:2]
    map_img = Image.fromarray(np.asarray(map_image, dtype=np.uint8).copy())
    draw = ImageDraw.Draw(map_img)

    positions = {n.id: n.position for n in pruned_topo.robot_nodes}
    robot_ids = set(positions)
    for a, b in pruned_topo.edges:
        if a in robot_ids and b in robot_ids:
            draw.line([positions[a], positions[b]], fill=NODE_COLOR, width=3)
    for lm in pruned_topo.landmark_nodes:
        label = lm.label + (f" {PREDICTED_MARKER}" if lm.predicted else "")
        draw.text((lm.position[0] + 3, lm.position[1] + 3), label, fill=LANDMARK_TEXT_COLOR)
    for node in pruned_topo.robot_nodes:
        x, y = node.position
        draw.ellipse([x - NODE_RADIUS, y - NODE_RADIUS, x + NODE_RADIUS, y + NODE_RADIUS],
                     fill=NODE_COLOR)
        text = str(node.id)
        tx = x - 3 * len(text)
        draw.text((tx, y - 5), text, fill=(255, 255, 255))

    map_arr = np.asarray(map_img)
    mh, mw = map_arr.shape[:2]
    out = np.full((max(vh, mh), vw + mw, 3), 255, dtype=np.uint8)
    out[:vh, :vw] = view
    out[:mh, vw:vw + mw] = map_arr
    return SvapImage(raster=out,
                     candidate_ids=tuple(n.id for n in pruned_topo.robot_nodes),
                     view_width=vw, map_width=mw)


def _label_phrase(labels: "list[tuple[str, bool]]") -> str:
    rendered = [f"{label} {PREDICTED_MARKER}" if predicted else label
                for label, predicted in labels]
    if not rendered:
        return ""
    if len(rendered) == 1:
        return rendered[0]
    return ", ".join(rendered[:-1]) + " and " + rendered[-1]


def _closing_labels(topo: TopoMap, segment: Segment) -> "list[tuple[str, bool]]":
    return [
        (lm.label, lm.predicted)
        for nid in segment.node_ids[-2:]
        for lm in topo.landmarks_at(nid)
    ]


def generate_plan(topo: TopoMap) -> NavPlan:
    """Template one navigation sentence per path segment.

    Each sentence reads "Move forward pass the <segment landmarks>, and
    <terminal action> when you see <landmarks near the closing node>.";
    the final sentence always ends with the stop action.  Segments without
    landmarks read "pass the open area"; predicted landmarks carry the
    "(expected)" marker.
    """
    sentences: list[str] = []
    for segment in segment_by_junctions(topo):
        body = _label_phrase(list(segment.landmarks)) or "open area"
        closing = _label_phrase(_closing_labels(topo, segment)) or _label_phrase(
            list(segment.landmarks)
        )
        if not closing:
            closing = "the goal" if segment.terminal_action == "stop" else "the next junction"
        sentences.append(
            f"Move forward pass the {body}, and {segment.terminal_action} "
            f"when you see {closing}."
        )
    return NavPlan(sentences=tuple(sentences), full_text=" ".join(sentences))


def _experience_block(experience_summary: "dict | None") -> str:
    if experience_summary is None:
        return "No relevant past experience available."
    return (
        "Retrieved past experience (most similar earlier step):\n"
        f"  step: {experience_summary['step']}\n"
        f"  scene: {experience_summary['scene_description']}\n"
        f"  position estimate: {experience_summary['position']}\n"
        f"  action taken: {experience_summary['action']}"
    )


def _prev_action_text(prev_action: str) -> str:
    return "no previous action" if prev_action == "none" else prev_action


def build_localization_prompt(sd_prev: str, prev_position: "int | None", prev_action: str,
                              nav_plan: NavPlan, candidate_ids: "list[int] | tuple[int, ...]",
                              experience_summary: "dict | None" = None,
                              image: np.ndarray | None = None) -> PromptPacket:
    """Assemble the position-estimation prompt for a set of candidate ids."""
    if not candidate_ids:
        raise EmptyCandidateSet("localization prompt needs at least one candidate")
    user = _prompt_text("user_localization.txt").format(
        scene_description=sd_prev,
        prev_position="unknown" if prev_position is None else str(prev_position),
        prev_action=_prev_action_text(prev_action),
        nav_plan=nav_plan.full_text,
        experience_block=_experience_block(experience_summary),
        candidates=", ".join(str(c) for c in candidate_ids),
    )
    return PromptPacket(system_text=_prompt_text("system_localization.txt"),
                        user_text=user, expected_schema="localization", image=image)


def build_action_prompt(sd_prev: str, prev_position: "int | None", prev_action: str,
                        nav_plan: NavPlan, estimated_position: int,
                        experience_summary: "dict | None" = None,
                        image: np.ndarray | None = None) -> PromptPacket:
    """Assemble the action-selection prompt for the four discrete actions."""
    user = _prompt_text("user_action.txt").format(
        scene_description=sd_prev,
        prev_position="unknown" if prev_position is None else str(prev_position),
        prev_action=_prev_action_text(prev_action),
        estimated_position=str(estimated_position),
        nav_plan=nav_plan.full_text,
        experience_block=_experience_block(experience_summary),
        candidates=", ".join(ACTIONS),
    )
    return PromptPacket(system_text=_prompt_text("system_action.txt"),
                        user_text=user, expected_schema="action", image=image)


_FENCE_RE = re.compile(r"```[a-zA-Z_]*\s*\n(.*?)```", re.DOTALL)
_BRACE_RE = re.compile(r"\{[^{}]*\}", re.DOTALL)
_PAIR_RE = re.compile(
    r"""["']?([A-Za-z0-9_ ]+?)["']?\s*[:=]\s*([+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"""
)


def _candidate_blocks(raw_text: str) -> list[str]:
    blocks = [m.group(1) for m in _FENCE_RE.finditer(raw_text)]
    blocks += [m.group(0) for m in _BRACE_RE.finditer(raw_text)]
    blocks.append(raw_text)
    return blocks


def _pairs_from_block(block: str) -> dict[str, float]:
    try:
        data = json.loads(block.strip())
        if isinstance(data, dict):
            return {str(k).strip(): float(v) for k, v in data.items()
                    if isinstance(v, (int, float))}
    except (json.JSONDecodeError, TypeError, ValueError):
        pass
    pairs = {}
    for key, value in _PAIR_RE.findall(block):
        try:
            pairs[key.strip()] = float(value)
        except ValueError:
            continue
    return pairs


def parse_scored_response(raw_text: str, legal_answers: "list | tuple") -> ScoredResponse:
    """Extract the probability block from backend output and pick the winner.

    Tolerates surrounding prose and fencing; unknown keys are dropped with a
    warning, missing legal answers score 0, negatives are clamped to 0, and
    scores are renormalized to sum 1.  Ties break toward the earliest entry
    in ``legal_answers`` (callers pass node ids ascending and actions in
    canonical order).

    Raises:
        Unparseable: when no score block can be extracted.
        AllZero: when every legal answer scores 0.
    """
    if not legal_answers:
        raise ValueError("legal answer set must be non-empty")
    canon = {str(ans).strip().lower(): ans for ans in legal_answers}

    best_pairs: dict[str, float] | None = None
    for block in _candidate_blocks(raw_text):
        pairs = _pairs_from_block(block)
        if not pairs:
            continue
        legal_pairs = {k: v for k, v in pairs.items() if k.strip().lower() in canon}
        unknown = set(pairs) - set(legal_pairs)
        if legal_pairs:
            if unknown:
                logger.warning("dropping unknown score keys: %s", sorted(unknown))
            best_pairs = legal_pairs
            break
    if best_pairs is None:
        raise Unparseable(f"no score block found in response: {raw_text[:120]!r}")

    scores = {ans: 0.0 for ans in legal_answers}
    for key, value in best_pairs.items():
        ans = canon[key.strip().lower()]
        if value < 0:
            logger.warning("clamping negative score %s for %r", value, ans)
            value = 0.0
        scores[ans] = value

    total = sum(scores.values())
    if total <= 0:
        raise AllZero("every legal answer scored zero")
    if not (0.9 <= total <= 1.1):
        logger.warning("score total %.3f outside [0.9, 1.1]; renormalizing", total)
    scores = {ans: v / total for ans, v in scores.items()}
    chosen = max(legal_answers, key=lambda ans: (scores[ans], -legal_answers.index(ans)))
    return ScoredResponse(scores=scores, chosen=chosen, raw_text=raw_text)


def render_scores(scores: dict) -> str:
    """Format a score map the way backends are asked to (fenced JSON)."""
    body = json.dumps({str(k): v for k, v in scores.items()})
    return f"```scores\n{body}\n```"
