"""Reasoning backends: scene description, landmark prediction, localization,
and action selection.

Two implementations share one contract: a remote multimodal chat API client
for deployments, and a deterministic offline oracle that scores candidates
by landmark overlap so the full loop is testable without network access.
"""

from __future__ import annotations

import base64
import io
import json
import logging
import math
import os
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import AllZero, BackendUnavailable, MalformedPrediction, Unparseable
from .memory import Experience
from .perception import LdictEntry, Observation
from .prompting import (
    NavPlan,
    PromptPacket,
    ScoredResponse,
    SvapImage,
    build_action_prompt,
    build_localization_prompt,
    parse_scored_response,
    _prompt_text,
)
from .topomap import ACTIONS, NO_ACTION, TopoMap, graph_distance, turn_direction

logger = logging.getLogger(__name__)

API_KEY_ENV = "HAMNAV_API_KEY"


@dataclass(frozen=True)
class ReasoningContext:
    """Inputs shared by localization and action prompts for one step."""

    scene_description: str
    prev_position: "int | None"
    prev_action: str
    plan: NavPlan
    candidates: tuple[int, ...]
    experience: "Experience | None" = None


@dataclass
class CallStats:
    calls: int = 0
    latency_s: float = 0.0

    def add(self, elapsed: float) -> None:
        self.calls += 1
        self.latency_s += elapsed


class ReasoningBackend(ABC):
    """Contract for the four reasoning capabilities, with call accounting."""

    backend_id: str = "base"

    def __init__(self) -> None:
        self.stats: dict[str, CallStats] = {
            name: CallStats() for name in ("describe", "predict", "localize", "act")
        }

    @property
    def total_calls(self) -> int:
        return sum(s.calls for s in self.stats.values())

    @property
    def total_latency_s(self) -> float:
        return sum(s.latency_s for s in self.stats.values())

    def _timed(self, name: str, fn):
        start = time.perf_counter()
        try:
            return fn()
        finally:
            self.stats[name].add(time.perf_counter() - start)

    def describe_scene(self, view_image: "np.ndarray | None",
                       entries: list[LdictEntry]) -> str:
        return self._timed("describe", lambda: self._describe_scene(view_image, entries))

    def predict_landmarks(self, map_image: "np.ndarray | None",
                          topo: TopoMap) -> dict[int, list[str]]:
        return self._timed("predict", lambda: self._predict_landmarks(map_image, topo))

    def localize(self, svap: SvapImage, context: ReasoningContext,
                 observation: Observation, topo: TopoMap) -> tuple[int, dict]:
        return self._timed("localize", lambda: self._localize(svap, context, observation, topo))

    def select_action(self, svap: SvapImage, context: ReasoningContext,
                      estimated_position: int, topo: TopoMap) -> tuple[str, dict]:
        return self._timed("act", lambda: self._select_action(svap, context,
                                                              estimated_position, topo))

    @abstractmethod
    def _describe_scene(self, view_image, entries) -> str: ...

    @abstractmethod
    def _predict_landmarks(self, map_image, topo) -> dict[int, list[str]]: ...

    @abstractmethod
    def _localize(self, svap, context, observation, topo) -> tuple[int, dict]: ...

    @abstractmethod
    def _select_action(self, svap, context, estimated_position, topo) -> tuple[str, dict]: ...


@dataclass(frozen=True)
class OracleRules:
    """Deterministic stand-in for common-sense reasoning in tests.

    ``co_occurrence`` maps a drawn label to labels expected near it;
    ``visibility_radius`` is the hop distance around a candidate node whose
    associated landmarks count toward its localization score.
    """

    co_occurrence: dict = field(default_factory=dict)
    visibility_radius: int = 0

    def __post_init__(self) -> None:
        for key, values in self.co_occurrence.items():
            if not key or any(not v for v in values):
                raise ValueError("co-occurrence labels must be non-empty")

    @classmethod
    def from_file(cls, path, visibility_radius: int = 0) -> "OracleRules":
        with open(path) as fh:
            return cls(co_occurrence=json.load(fh), visibility_radius=visibility_radius)


class OracleBackend(ReasoningBackend):
    """Pure-function backend: identical inputs give identical outputs."""

    backend_id = "oracle"

    def __init__(self, rules: "OracleRules | None" = None) -> None:
        super().__init__()
        self.rules = rules or OracleRules()

    def _describe_scene(self, view_image, entries: list[LdictEntry]) -> str:
        if not entries:
            return "You see nothing notable."
        parts = "; ".join(f"{e.label} on your {e.quadrant}" for e in entries)
        return f"You see: {parts}."

    def _predict_landmarks(self, map_image, topo: TopoMap) -> dict[int, list[str]]:
        # Only labels absent from the whole sketch are worth predicting: the
        # point is compensating omissions, not duplicating drawn landmarks.
        drawn = {lm.label for lm in topo.landmark_nodes if not lm.predicted}
        predictions: dict[int, list[str]] = {}
        for node in topo.robot_nodes:
            nearby = self._labels_within(topo, node.id, radius=1, drawn_only=True)
            inferred: set[str] = set()
            for label in nearby:
                inferred.update(self.rules.co_occurrence.get(label, []))
            new = sorted(inferred - drawn)
            if new:
                predictions[node.id] = new
        return predictions

    def _labels_within(self, topo: TopoMap, node_id: int, radius: int,
                       drawn_only: bool = False) -> set[str]:
        labels = set()
        for lm in topo.landmark_nodes:
            if drawn_only and lm.predicted:
                continue
            if graph_distance(topo, topo.association(lm), node_id) <= radius:
                labels.add(lm.label)
        return labels

    def _localize(self, svap, context: ReasoningContext, observation: Observation,
                  topo: TopoMap) -> tuple[int, dict]:
        observed = {obj.label for obj in observation.objects}
        observed_turns = {t.direction for t in observation.turns}
        scores: dict[int, float] = {}
        for cand in context.candidates:
            overlap = observed & self._labels_within(topo, cand, self.rules.visibility_radius)
            score = float(len(overlap))
            if observed_turns and self._junction_direction_near(topo, cand) in observed_turns:
                score += 0.5
            scores[cand] = score
        total = sum(scores.values())
        if total == 0:
            fallback = (context.prev_position
                        if context.prev_position in context.candidates
                        else min(context.candidates))
            return fallback, {c: (1.0 if c == fallback else 0.0) for c in scores}

        def rank(cand: int):
            dist = (graph_distance(topo, cand, context.prev_position)
                    if context.prev_position is not None else 0)
            return (-scores[cand], dist, cand)

        chosen = min(context.candidates, key=rank)
        return chosen, {c: v / total for c, v in scores.items()}

    def _junction_direction_near(self, topo: TopoMap, node_id: int) -> "str | None":
        for other in topo.robot_nodes:
            if other.is_junction and graph_distance(topo, other.id, node_id) <= 1:
                return turn_direction(topo, other.id)
        return None

    def _select_action(self, svap, context: ReasoningContext, estimated_position: int,
                       topo: TopoMap) -> tuple[str, dict]:
        if estimated_position == topo.goal_id:
            return "stop", _one_hot_action("stop")
        idx = topo.chain_index(estimated_position)
        nodes = topo.robot_nodes
        heading = self._assumed_heading(topo, context, estimated_position)
        nxt = nodes[idx + 1].position
        here = nodes[idx].position
        out = (nxt[0] - here[0], nxt[1] - here[1])
        action = _heading_change_action(heading, out)
        return action, _one_hot_action(action)

    def _assumed_heading(self, topo: TopoMap, context: ReasoningContext,
                         estimated_position: int) -> tuple[float, float]:
        """Map-frame heading implied by the chain, rotated by a just-executed
        turn at the same node."""
        idx = topo.chain_index(estimated_position)
        nodes = topo.robot_nodes
        if idx == 0:
            a, b = nodes[0].position, nodes[1].position
        else:
            a, b = nodes[idx - 1].position, nodes[idx].position
        heading = (b[0] - a[0], b[1] - a[1])
        if context.prev_position == estimated_position:
            if context.prev_action == "turn left":
                heading = (heading[1], -heading[0])
            elif context.prev_action == "turn right":
                heading = (-heading[1], heading[0])
        return heading


def _one_hot_action(action: str) -> dict:
    return {a: (1.0 if a == action else 0.0) for a in ACTIONS}


def _heading_change_action(heading: tuple[float, float], out: tuple[float, float]) -> str:
    """Forward when the next edge stays within 45 degrees of the heading,
    otherwise the turn direction by cross-product sign (pixel frame)."""
    dot = heading[0] * out[0] + heading[1] * out[1]
    cross = heading[0] * out[1] - heading[1] * out[0]
    norm = math.hypot(*heading) * math.hypot(*out)
    if norm == 0 or dot / norm >= math.cos(math.radians(45.0)):
        return "move forward"
    return "turn right" if cross > 0 else "turn left"


@dataclass(frozen=True)
class RemoteConfig:
    base_url: str
    model: str
    timeout_s: float = 60.0
    retries: int = 2
    temperature: float = 0.0
    api_key_env: str = API_KEY_ENV


class RemoteBackend(ReasoningBackend):
    """Chat-completion style HTTP client with inline base64 images.

    Every call is bounded by the configured timeout and retried with
    exponential backoff before raising BackendUnavailable.
    """

    backend_id = "remote"

    def __init__(self, config: RemoteConfig, session=None) -> None:
        super().__init__()
        self.config = config
        if session is None:
            import requests

            session = requests.Session()
        self.session = session

    # -- wire plumbing --------------------------------------------------

    def _chat(self, packet: PromptPacket) -> str:
        content: list[dict] = [{"type": "text", "text": packet.user_text}]
        if packet.image is not None:
            content.append({
                "type": "image_url",
                "image_url": {"url": "data:image/png;base64," + _png_b64(packet.image)},
            })
        payload = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": packet.system_text},
                {"role": "user", "content": content},
            ],
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        url = self.config.base_url.rstrip("/") + "/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = self.session.post(url, json=payload, headers=headers,
                                         timeout=self.config.timeout_s)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except Exception as exc:  # timeouts, HTTP errors, bad JSON shape
                last_error = exc
                if attempt < self.config.retries:
                    time.sleep(min(2.0 ** attempt, 8.0))
        raise BackendUnavailable(f"remote backend failed after "
                                 f"{self.config.retries + 1} attempts: {last_error}")

    # -- capabilities ----------------------------------------------------

    def _describe_scene(self, view_image, entries: list[LdictEntry]) -> str:
        lines = "\n".join(f"- {e.label} on your {e.quadrant}" for e in entries) or "- none"
        packet = PromptPacket(
            system_text=_prompt_text("system_describe.txt"),
            user_text=_prompt_text("user_describe.txt").format(landmark_lines=lines),
            expected_schema="description",
            image=view_image,
        )
        return self._chat(packet).strip()

    def _predict_landmarks(self, map_image, topo: TopoMap) -> dict[int, list[str]]:
        node_lines = []
        for node in topo.robot_nodes:
            labels = sorted(lm.label for lm in topo.landmarks_at(node.id))
            node_lines.append(f"- node {node.id}: {', '.join(labels) if labels else 'nothing drawn'}")
        packet = PromptPacket(
            system_text=_prompt_text("system_predict.txt"),
            user_text=_prompt_text("user_predict.txt").format(node_lines="\n".join(node_lines)),
            expected_schema="prediction",
            image=map_image,
        )
        raw = self._chat(packet)
        parsed = _extract_prediction_json(raw)
        predictions: dict[int, list[str]] = {}
        valid_ids = {n.id for n in topo.robot_nodes}
        for key, labels in parsed.items():
            try:
                node_id = int(key)
            except (TypeError, ValueError):
                continue
            if node_id in valid_ids and isinstance(labels, list):
                clean = [str(v) for v in labels if str(v).strip()]
                if clean:
                    predictions[node_id] = clean
        return predictions

    def _localize(self, svap: SvapImage, context: ReasoningContext,
                  observation: Observation, topo: TopoMap) -> tuple[int, dict]:
        candidates = sorted(context.candidates)
        packet = build_localization_prompt(
            context.scene_description, context.prev_position, context.prev_action,
            context.plan, candidates,
            experience_summary=context.experience.summary() if context.experience else None,
            image=svap.raster,
        )
        raw = self._chat(packet)
        try:
            response = parse_scored_response(raw, candidates)
        except AllZero:
            fallback = (context.prev_position if context.prev_position in candidates
                        else min(candidates))
            return fallback, {c: 0.0 for c in candidates}
        return response.chosen, response.scores

    def _select_action(self, svap: SvapImage, context: ReasoningContext,
                       estimated_position: int, topo: TopoMap) -> tuple[str, dict]:
        packet = build_action_prompt(
            context.scene_description, context.prev_position, context.prev_action,
            context.plan, estimated_position,
            experience_summary=context.experience.summary() if context.experience else None,
            image=svap.raster,
        )
        raw = self._chat(packet)
        try:
            response = parse_scored_response(raw, list(ACTIONS))
        except AllZero:
            return "stop", _one_hot_action("stop")
        return response.chosen, response.scores


def _png_b64(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _extract_prediction_json(raw: str) -> dict:
    import re

    fence = re.search(r"```[a-zA-Z_]*\s*\n(.*?)```", raw, re.DOTALL)
    candidates = [fence.group(1)] if fence else []
    brace = re.search(r"\{.*\}", raw, re.DOTALL)
    if brace:
        candidates.append(brace.group(0))
    for text in candidates:
        try:
            data = json.loads(text.strip())
            if isinstance(data, dict):
                return data
        except json.JSONDecodeError:
            continue
    raise MalformedPrediction(f"no JSON prediction object in response: {raw[:120]!r}")


def make_backend(name: str, rules: "OracleRules | None" = None,
                 remote_config: "RemoteConfig | None" = None) -> ReasoningBackend:
    """Factory for CLI/config backend selection."""
    if name == "oracle":
        return OracleBackend(rules)
    if name == "remote":
        if remote_config is None:
            raise ValueError("remote backend needs a RemoteConfig")
        return RemoteBackend(remote_config)
    raise ValueError(f"unknown backend {name!r}")
