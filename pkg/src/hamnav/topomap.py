"""Topological map built from a hand-drawn map.

Robot position nodes are sampled along the sketched path and chained by
edges; each landmark becomes a landmark node with a single association edge
to its nearest robot node.  Node ids are 1-based in chain order for robot
nodes, with landmark nodes numbered after them, so the id printed on a map
overlay is the id used everywhere else.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

from .errors import UnknownNode
from .sketchmap import HandDrawnMap, Point, resample_path

# Canonical discrete actions, in tie-break order.
ACTIONS = ("move forward", "turn left", "turn right", "stop")
NO_ACTION = "none"

DEFAULT_ANGLE_THRESHOLD_DEG = 30.0


@dataclass(frozen=True)
class RobotNode:
    id: int
    position: Point
    is_junction: bool = False
    floor: int = 0


@dataclass(frozen=True)
class LandmarkNode:
    id: int
    label: str
    position: Point
    predicted: bool = False

    def __post_init__(self) -> None:
        if not self.label.strip():
            raise ValueError("landmark node label must be non-empty")


@dataclass(frozen=True)
class PruneParams:
    """Weights of the logistic retention score.

    ``alpha`` weights the hop distance to the previous position estimate,
    ``beta`` is the hop-distance sensitivity, ``gamma`` weights the
    action-transition inconsistency term, and ``threshold`` is the strict
    retention cutoff.
    """

    alpha: float = 0.5
    beta: float = 2.0
    gamma: float = 0.5
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.gamma < 0:
            raise ValueError("alpha and gamma must be >= 0")
        if not (0 < self.threshold < 1):
            raise ValueError("threshold must lie in (0, 1)")


@dataclass(frozen=True)
class Segment:
    """A run of consecutive robot nodes closed by a junction (or the goal)."""

    node_ids: tuple[int, ...]
    landmarks: tuple[tuple[str, bool], ...]  # (label, predicted)
    terminal_action: str


@dataclass(frozen=True)
class TopoMap:
    robot_nodes: tuple[RobotNode, ...]
    landmark_nodes: tuple[LandmarkNode, ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        ids = [n.id for n in self.robot_nodes] + [n.id for n in self.landmark_nodes]
        if len(ids) != len(set(ids)):
            raise ValueError("node ids must be unique")

    @property
    def start_id(self) -> int:
        return self.robot_nodes[0].id

    @property
    def goal_id(self) -> int:
        return self.robot_nodes[-1].id

    def robot_node(self, node_id: int) -> RobotNode:
        for node in self.robot_nodes:
            if node.id == node_id:
                return node
        raise UnknownNode(f"no robot node with id {node_id}")

    def is_robot_node(self, node_id: int) -> bool:
        return any(n.id == node_id for n in self.robot_nodes)

    def chain_index(self, node_id: int) -> int:
        for i, node in enumerate(self.robot_nodes):
            if node.id == node_id:
                return i
        raise UnknownNode(f"no robot node with id {node_id}")

    def association(self, landmark: LandmarkNode) -> int:
        """Robot node id the landmark node is attached to."""
        robot_ids = {n.id for n in self.robot_nodes}
        for a, b in self.edges:
            if a == landmark.id and b in robot_ids:
                return b
            if b == landmark.id and a in robot_ids:
                return a
        raise UnknownNode(f"landmark node {landmark.id} has no association edge")

    def landmarks_at(self, robot_id: int) -> list[LandmarkNode]:
        """Landmark nodes associated with the given robot node."""
        return [lm for lm in self.landmark_nodes if self.association(lm) == robot_id]

    def junction_ids(self) -> list[int]:
        return [n.id for n in self.robot_nodes if n.is_junction]

    def serializable(self) -> dict:
        """Node/edge arrays for the debug graph file and the UI overlay."""
        return {
            "robot_nodes": [
                {"id": n.id, "x": n.position[0], "y": n.position[1],
                 "is_junction": n.is_junction, "floor": n.floor}
                for n in self.robot_nodes
            ],
            "landmark_nodes": [
                {"id": n.id, "label": n.label, "x": n.position[0], "y": n.position[1],
                 "predicted": n.predicted}
                for n in self.landmark_nodes
            ],
            "edges": [list(e) for e in self.edges],
        }


def build(hmap: HandDrawnMap, node_interval: float | None = None,
          assoc_radius: float | None = None) -> TopoMap:
    """Build the topological map from a hand-drawn map.

    Robot nodes are placed by resampling the path at ``node_interval``
    pixels (default: drawing diagonal / 20).  Each landmark is associated
    to its nearest robot node, ties broken toward the lower node id;
    landmarks farther than ``assoc_radius`` (when given) are still attached
    to their nearest node since a sketch landmark always describes some
    part of the route.
    """
    if node_interval is None:
        node_interval = hmap.diagonal / 20.0
    positions = resample_path(hmap.path, node_interval)

    robot_nodes = tuple(
        RobotNode(id=i + 1, position=p, floor=hmap.floor_at(p))
        for i, p in enumerate(positions)
    )
    edges: list[tuple[int, int]] = [
        (robot_nodes[i].id, robot_nodes[i + 1].id) for i in range(len(robot_nodes) - 1)
    ]

    landmark_nodes: list[LandmarkNode] = []
    next_id = len(robot_nodes) + 1
    for lm in hmap.landmarks:
        nearest = min(robot_nodes, key=lambda n: (math.dist(n.position, lm.position), n.id))
        if assoc_radius is not None and math.dist(nearest.position, lm.position) > assoc_radius:
            continue
        node = LandmarkNode(id=next_id, label=lm.label, position=lm.position)
        next_id += 1
        landmark_nodes.append(node)
        edges.append((node.id, nearest.id))

    return TopoMap(robot_nodes=robot_nodes, landmark_nodes=tuple(landmark_nodes),
                   edges=tuple(edges))


def _heading(a: Point, b: Point) -> tuple[float, float]:
    dx, dy = b[0] - a[0], b[1] - a[1]
    norm = math.hypot(dx, dy)
    if norm == 0:
        return (0.0, 0.0)
    return (dx / norm, dy / norm)


def _turn_at(nodes: tuple[RobotNode, ...], index: int) -> tuple[float, float]:
    """(unsigned heading change in degrees, cross product) at a chain index."""
    h_in = _heading(nodes[index - 1].position, nodes[index].position)
    h_out = _heading(nodes[index].position, nodes[index + 1].position)
    dot = max(-1.0, min(1.0, h_in[0] * h_out[0] + h_in[1] * h_out[1]))
    cross = h_in[0] * h_out[1] - h_in[1] * h_out[0]
    return math.degrees(math.acos(dot)), cross


def mark_junctions(topo: TopoMap, angle_threshold: float = DEFAULT_ANGLE_THRESHOLD_DEG) -> TopoMap:
    """Flag robot nodes where the chain heading changes more than the threshold.

    Endpoints are never junctions.
    """
    nodes = list(topo.robot_nodes)
    flagged = []
    for i, node in enumerate(nodes):
        is_junction = False
        if 0 < i < len(nodes) - 1:
            angle, _ = _turn_at(topo.robot_nodes, i)
            is_junction = angle > angle_threshold
        flagged.append(replace(node, is_junction=is_junction))
    return replace(topo, robot_nodes=tuple(flagged))


def turn_direction(topo: TopoMap, node_id: int) -> str | None:
    """'left' or 'right' at a junction node, None elsewhere.

    Sign convention follows the pixel frame (x right, y down): a positive
    cross product of incoming x outgoing headings is a right turn.
    """
    idx = topo.chain_index(node_id)
    if not topo.robot_nodes[idx].is_junction:
        return None
    _, cross = _turn_at(topo.robot_nodes, idx)
    return "right" if cross > 0 else "left"


def segment_by_junctions(topo: TopoMap) -> list[Segment]:
    """Split the robot-node chain into segments closed by junction nodes.

    A junction node closes its segment; the final segment is closed by the
    goal with terminal action ``stop``.  Each segment carries the labels of
    landmarks associated to its nodes, with predicted ones flagged.
    """
    segments: list[Segment] = []
    current: list[int] = []
    for node in topo.robot_nodes:
        current.append(node.id)
        if node.is_junction:
            direction = turn_direction(topo, node.id)
            action = f"turn {direction}" if direction else "move forward"
            segments.append(_finish_segment(topo, current, action))
            current = []
    if current:
        segments.append(_finish_segment(topo, current, "stop"))
    else:
        # Degenerate: chain ends exactly on a junction; keep terminal stop.
        last = segments.pop()
        segments.append(replace(last, terminal_action="stop"))
    return segments


def _finish_segment(topo: TopoMap, node_ids: list[int], action: str) -> Segment:
    labels: list[tuple[str, bool]] = []
    for nid in node_ids:
        for lm in topo.landmarks_at(nid):
            labels.append((lm.label, lm.predicted))
    return Segment(node_ids=tuple(node_ids), landmarks=tuple(labels), terminal_action=action)


def graph_distance(topo: TopoMap, node_a: int, node_b: int) -> int:
    """Hop count between two robot nodes along chain edges (BFS)."""
    if not topo.is_robot_node(node_a):
        raise UnknownNode(f"no robot node with id {node_a}")
    if not topo.is_robot_node(node_b):
        raise UnknownNode(f"no robot node with id {node_b}")
    if node_a == node_b:
        return 0
    robot_ids = {n.id for n in topo.robot_nodes}
    adj: dict[int, list[int]] = {nid: [] for nid in robot_ids}
    for a, b in topo.edges:
        if a in robot_ids and b in robot_ids:
            adj[a].append(b)
            adj[b].append(a)
    queue = deque([(node_a, 0)])
    seen = {node_a}
    while queue:
        nid, hops = queue.popleft()
        for nxt in adj[nid]:
            if nxt == node_b:
                return hops + 1
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, hops + 1))
    raise UnknownNode(f"no chain path between {node_a} and {node_b}")


def transition_inconsistency(topo: TopoMap, node_id: int, prev_estimate: int | None,
                             prev_action: str) -> float:
    """0 when ``node_id`` is reachable from the previous estimate under the
    previous action, else 1.

    Reachable sets: ``move forward`` keeps the previous node and its
    successors within 2 hops toward the goal; turns and ``stop`` keep the
    previous node and its chain neighbors; ``none`` (no previous action)
    treats every node as consistent.
    """
    if prev_action == NO_ACTION or prev_estimate is None:
        return 0.0
    prev_idx = topo.chain_index(prev_estimate)
    idx = topo.chain_index(node_id)
    if prev_action == "move forward":
        reachable = idx == prev_idx or 0 < idx - prev_idx <= 2
    else:  # turn left / turn right / stop
        reachable = abs(idx - prev_idx) <= 1
    return 0.0 if reachable else 1.0


def retention(topo: TopoMap, node_id: int, prev_estimate: int | None, prev_action: str,
              params: PruneParams = PruneParams()) -> float:
    """Logistic retention score of a robot node as a position candidate.

    ``1 / (1 + exp(alpha * (d - beta) + gamma * delta))`` where ``d`` is the
    chain-hop distance to the previous estimate and ``delta`` the transition
    inconsistency indicator.
    """
    if prev_estimate is None:
        return 1.0
    d = graph_distance(topo, node_id, prev_estimate)
    delta = transition_inconsistency(topo, node_id, prev_estimate, prev_action)
    exponent = params.alpha * (d - params.beta) + params.gamma * delta
    return 1.0 / (1.0 + math.exp(exponent))


def prune(topo: TopoMap, prev_estimate: int | None, prev_action: str,
          params: PruneParams = PruneParams(), bypass: bool = False) -> TopoMap:
    """Drop robot nodes whose retention score does not exceed the threshold.

    The previous estimate itself is always retained.  When the previous
    estimate is unknown (``None``) or ``bypass`` is set, the full map is
    returned.  Landmark nodes survive only with their associated robot node.
    """
    if bypass or prev_estimate is None:
        return topo
    keep_ids = {
        node.id
        for node in topo.robot_nodes
        if retention(topo, node.id, prev_estimate, prev_action, params) > params.threshold
    }
    keep_ids.add(prev_estimate)
    robot_nodes = tuple(n for n in topo.robot_nodes if n.id in keep_ids)
    landmark_nodes = tuple(lm for lm in topo.landmark_nodes if topo.association(lm) in keep_ids)
    kept_l_ids = {lm.id for lm in landmark_nodes}
    edges = tuple(
        (a, b) for a, b in topo.edges
        if (a in keep_ids or a in kept_l_ids) and (b in keep_ids or b in kept_l_ids)
    )
    return TopoMap(robot_nodes=robot_nodes, landmark_nodes=landmark_nodes, edges=edges)


def integrate_predictions(topo: TopoMap, predictions: dict[int, list[str]]) -> TopoMap:
    """Attach predicted landmark nodes to robot nodes.

    A prediction duplicating an existing (label, node) association — drawn
    or previously predicted — is ignored, which makes this idempotent.
    """
    existing = {(lm.label, topo.association(lm)) for lm in topo.landmark_nodes}
    new_nodes: list[LandmarkNode] = []
    new_edges: list[tuple[int, int]] = []
    next_id = max([n.id for n in topo.robot_nodes] + [n.id for n in topo.landmark_nodes]) + 1
    for node_id in sorted(predictions):
        robot = topo.robot_node(node_id)
        for label in predictions[node_id]:
            if (label, node_id) in existing:
                continue
            existing.add((label, node_id))
            node = LandmarkNode(id=next_id, label=label, position=robot.position, predicted=True)
            next_id += 1
            new_nodes.append(node)
            new_edges.append((node.id, node_id))
    if not new_nodes:
        return topo
    return TopoMap(
        robot_nodes=topo.robot_nodes,
        landmark_nodes=topo.landmark_nodes + tuple(new_nodes),
        edges=topo.edges + tuple(new_edges),
    )
