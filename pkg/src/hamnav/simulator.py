"""Deterministic grid-world simulator.

Worlds are JSON files with per-floor grid rows (``#`` wall, ``.`` free,
``S`` start, ``G`` goal, letters = landmark anchors keyed to a legend),
plus the legend, cell size in meters, start heading, and optional stair
links between floors.  The simulator synthesizes egocentric observations
(ground-truth object detections with bearing-encoded boxes and a
perspective-style traversable mask), executes the four discrete actions,
generates ground-truth sketches and their distorted variants, and computes
episode metrics.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .errors import DisconnectedStartGoal, SchemaError
from .perception import BoundingBox, DetectedObject, Observation
from .sketchmap import FloorPane, HandDrawnMap, LandmarkAnnotation

HEADINGS = ("N", "E", "S", "W")
_HEADING_VEC = {"N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0)}
_LEFT_OF = {"N": "W", "W": "S", "S": "E", "E": "N"}
_RIGHT_OF = {"N": "E", "E": "S", "S": "W", "W": "N"}

DEFAULT_PX_PER_CELL = 20
DEFAULT_FOV_DEG = 180.0
DEFAULT_RANGE_CELLS = 4.0
MASK_TURN_RANGE = 3

VIEW_W, VIEW_H = 320, 240
_HORIZON_FRAC = 0.35
_CORRIDOR_HALF_FRAC = 0.45


@dataclass(frozen=True)
class WorldLandmark:
    label: str
    cell: tuple[int, int]  # (col, row)
    floor: int


@dataclass(frozen=True)
class StairLink:
    origin: tuple[int, int, int]  # (floor, col, row)
    target: tuple[int, int, int]


@dataclass(frozen=True)
class RobotPose:
    cell: tuple[int, int]
    heading: str
    floor: int = 0

    def __post_init__(self) -> None:
        if self.heading not in HEADINGS:
            raise ValueError(f"heading must be one of {HEADINGS}")


@dataclass(frozen=True)
class GridWorld:
    name: str
    floors: tuple[np.ndarray, ...]  # bool arrays (rows, cols), True = free
    cell_size: float
    landmarks: tuple[WorldLandmark, ...]
    start: tuple[int, int]
    start_heading: str
    start_floor: int
    goal: tuple[int, int]
    goal_floor: int
    stairs: tuple[StairLink, ...] = ()

    def is_free(self, floor: int, cell: tuple[int, int]) -> bool:
        grid = self.floors[floor]
        c, r = cell
        return 0 <= r < grid.shape[0] and 0 <= c < grid.shape[1] and bool(grid[r, c])

    def stair_from(self, floor: int, cell: tuple[int, int]) -> "StairLink | None":
        for link in self.stairs:
            if link.origin == (floor, cell[0], cell[1]):
                return link
        return None

    def floor_size(self, floor: int) -> tuple[int, int]:
        grid = self.floors[floor]
        return grid.shape[1], grid.shape[0]  # (cols, rows)


def load_world(path: str | Path) -> GridWorld:
    """Load and validate a world file.

    Raises:
        SchemaError: on malformed files or invalid start/goal cells.
        DisconnectedStartGoal: when no free path connects start to goal.
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read world file {path}: {exc}") from exc
    world = world_from_dict(data)
    if shortest_path(world) is None:
        raise DisconnectedStartGoal(f"world {world.name}: goal unreachable from start")
    return world


def world_from_dict(data: dict) -> GridWorld:
    try:
        legend = {str(k): str(v) for k, v in data.get("legend", {}).items()}
        cell_size = float(data["cell_size"])
        heading = str(data.get("heading", "E"))
        raw_floors = data["floors"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"world schema violation: {exc}") from exc
    if heading not in HEADINGS:
        raise SchemaError(f"heading must be one of {HEADINGS}, got {heading!r}")
    if not raw_floors:
        raise SchemaError("world needs at least one floor")

    floors: list[np.ndarray] = []
    landmarks: list[WorldLandmark] = []
    start = goal = None
    start_floor = goal_floor = 0
    for f, floor_spec in enumerate(raw_floors):
        rows = floor_spec["rows"]
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise SchemaError(f"floor {f} rows have inconsistent widths")
        grid = np.zeros((len(rows), width), dtype=bool)
        for r, row in enumerate(rows):
            for c, ch in enumerate(row):
                if ch == "#":
                    continue
                if ch in (".", "S", "G"):
                    grid[r, c] = True
                    if ch == "S":
                        if start is not None:
                            raise SchemaError("multiple start cells")
                        start, start_floor = (c, r), f
                    elif ch == "G":
                        if goal is not None:
                            raise SchemaError("multiple goal cells")
                        goal, goal_floor = (c, r), f
                elif ch in legend:
                    landmarks.append(WorldLandmark(label=legend[ch], cell=(c, r), floor=f))
                else:
                    raise SchemaError(f"unknown cell char {ch!r} at floor {f} ({c},{r})")
        floors.append(grid)

    if start is None:
        raise SchemaError("world has no start cell 'S'")
    if goal is None:
        raise SchemaError("world has no goal cell 'G'")

    stairs = tuple(
        StairLink(origin=tuple(link["from"]), target=tuple(link["to"]))
        for link in data.get("stairs", [])
    )
    world = GridWorld(
        name=str(data.get("name", "world")),
        floors=tuple(floors),
        cell_size=cell_size,
        landmarks=tuple(landmarks),
        start=start,
        start_heading=heading,
        start_floor=start_floor,
        goal=goal,
        goal_floor=goal_floor,
        stairs=stairs,
    )
    for lm in world.landmarks:
        c, r = lm.cell
        adjacent_free = any(
            world.is_free(lm.floor, (c + dc, r + dr))
            for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1))
        )
        if not adjacent_free:
            raise SchemaError(f"landmark {lm.label!r} at {lm.cell} has no adjacent free cell")
    for link in world.stairs:
        for floor, c, r in (link.origin, link.target):
            if not world.is_free(floor, (c, r)):
                raise SchemaError(f"stair cell ({floor},{c},{r}) is not free")
    return world


# --- shortest paths ---------------------------------------------------------


def _neighbors(world: GridWorld, floor: int, cell: tuple[int, int]):
    for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nxt = (cell[0] + dc, cell[1] + dr)
        if world.is_free(floor, nxt):
            yield floor, nxt
    link = world.stair_from(floor, cell)
    if link is not None:
        yield link.target[0], (link.target[1], link.target[2])


def shortest_path(world: GridWorld) -> "list[tuple[int, int, int]] | None":
    """BFS shortest path start->goal as (floor, col, row) cells, or None."""
    start = (world.start_floor, world.start)
    goal = (world.goal_floor, world.goal)
    queue = deque([start])
    parents: dict = {start: None}
    while queue:
        state = queue.popleft()
        if state == goal:
            path = []
            while state is not None:
                floor, (c, r) = state
                path.append((floor, c, r))
                state = parents[state]
            return path[::-1]
        for nxt in _neighbors(world, state[0], state[1]):
            if nxt not in parents:
                parents[nxt] = state
                queue.append(nxt)
    return None


def shortest_path_length_m(world: GridWorld) -> float:
    path = shortest_path(world)
    if path is None:
        raise DisconnectedStartGoal(f"world {world.name}: goal unreachable")
    return (len(path) - 1) * world.cell_size


# --- observation synthesis --------------------------------------------------


def _bearing_deg(heading: str, delta: tuple[float, float]) -> float:
    """Bearing of a grid offset relative to the heading; positive = right."""
    hx, hy = _HEADING_VEC[heading]
    dx, dy = delta
    dot = hx * dx + hy * dy
    cross = hx * dy - hy * dx
    return math.degrees(math.atan2(cross, dot))


def _line_of_sight(world: GridWorld, floor: int, a: tuple[int, int],
                   b: tuple[int, int]) -> bool:
    """True when every intermediate cell on the a->b raster line is free."""
    x0, y0 = a
    x1, y1 = b
    steps = max(abs(x1 - x0), abs(y1 - y0))
    for i in range(1, steps):
        t = i / steps
        c = round(x0 + (x1 - x0) * t)
        r = round(y0 + (y1 - y0) * t)
        if (c, r) in (a, b):
            continue
        if not world.is_free(floor, (c, r)):
            return False
    return True


def observe(world: GridWorld, pose: RobotPose, fov_degrees: float = DEFAULT_FOV_DEG,
            range_cells: float = DEFAULT_RANGE_CELLS) -> Observation:
    """Synthesize the egocentric percept at a pose.

    Objects are the landmarks within range, inside the field-of-view cone,
    and with line of sight; each gets a synthetic bounding box whose center
    x encodes its bearing across the view.  The mask is a perspective-style
    trapezoid of the free corridor ahead with notches where side corridors
    open.  Deterministic for a fixed world and pose.
    """
    objects: list[DetectedObject] = []
    half_fov = fov_degrees / 2.0
    ordered = sorted(world.landmarks, key=lambda lm: (lm.floor, lm.cell[1], lm.cell[0]))
    for lm in ordered:
        if lm.floor != pose.floor:
            continue
        delta = (lm.cell[0] - pose.cell[0], lm.cell[1] - pose.cell[1])
        dist = math.hypot(*delta)
        if dist == 0 or dist > range_cells:
            continue
        bearing = _bearing_deg(pose.heading, delta)
        if abs(bearing) > half_fov + 1e-9:
            continue
        if not _line_of_sight(world, pose.floor, pose.cell, lm.cell):
            continue
        objects.append(DetectedObject(label=lm.label,
                                      bbox=_bearing_bbox(bearing, dist, fov_degrees)))

    mask = _render_mask(world, pose, range_cells)
    return Observation(width=VIEW_W, height=VIEW_H, objects=tuple(objects), mask=mask)


def _bearing_bbox(bearing: float, dist: float, fov_degrees: float) -> BoundingBox:
    center_x = (0.5 + bearing / fov_degrees) * VIEW_W
    box_h = max(14.0, VIEW_H * 0.5 / max(dist, 0.5))
    box_w = box_h * 0.6
    cx = min(max(center_x, box_w / 2 + 1), VIEW_W - box_w / 2 - 1)
    cy = VIEW_H * 0.52
    return BoundingBox(cx - box_w / 2, cy - box_h / 2, cx + box_w / 2, cy + box_h / 2)


def _ahead_free_cells(world: GridWorld, pose: RobotPose, limit: int) -> int:
    hx, hy = _HEADING_VEC[pose.heading]
    d = 0
    while d < limit:
        nxt = (pose.cell[0] + hx * (d + 1), pose.cell[1] + hy * (d + 1))
        if not world.is_free(pose.floor, nxt):
            break
        d += 1
    return d


def _side_openings(world: GridWorld, pose: RobotPose, depth: int) -> tuple[list[int], list[int]]:
    hx, hy = _HEADING_VEC[pose.heading]
    lx, ly = _HEADING_VEC[_LEFT_OF[pose.heading]]
    rx, ry = _HEADING_VEC[_RIGHT_OF[pose.heading]]
    left, right = [], []
    for d in range(1, depth + 1):
        base = (pose.cell[0] + hx * d, pose.cell[1] + hy * d)
        if world.is_free(pose.floor, (base[0] + lx, base[1] + ly)):
            left.append(d)
        if world.is_free(pose.floor, (base[0] + rx, base[1] + ry)):
            right.append(d)
    return left, right


def _render_mask(world: GridWorld, pose: RobotPose, range_cells: float) -> np.ndarray:
    ahead = _ahead_free_cells(world, pose, int(range_cells))
    turn_depth = min(ahead, MASK_TURN_RANGE)
    left_open, right_open = _side_openings(world, pose, turn_depth)
    return render_corridor_mask(VIEW_W, VIEW_H, ahead, left_open, right_open)


def render_corridor_mask(width: int, height: int, ahead_free: int,
                         left_open: "list[int]", right_open: "list[int]") -> np.ndarray:
    """Draw the perspective trapezoid of a corridor with side-opening notches.

    ``ahead_free`` is the number of free cells ahead (the far wall sits past
    the last free cell); ``left_open``/``right_open`` list the cell depths
    with a free side cell, each rendered as a notch to the image edge.
    """
    horizon = height * _HORIZON_FRAC
    span = height - horizon
    cx = width / 2.0
    w0 = width * _CORRIDOR_HALF_FRAC

    def depth_at(y: float) -> float:
        return span / (y - horizon) - 1.0 if y > horizon else math.inf

    far_limit = ahead_free + 0.5
    mask = np.zeros((height, width), dtype=np.uint8)
    for y in range(int(math.ceil(horizon)), height):
        d = depth_at(y + 0.5)
        if d > far_limit:
            continue
        half = w0 * ((y + 0.5) - horizon) / span
        x_lo, x_hi = cx - half, cx + half
        if any(abs(d - od) <= 0.5 for od in left_open):
            x_lo = 0
        if any(abs(d - od) <= 0.5 for od in right_open):
            x_hi = width
        mask[y, int(round(x_lo)):int(round(x_hi))] = 255
    return mask


# --- action execution -------------------------------------------------------


@dataclass(frozen=True)
class ExecutionResult:
    pose: RobotPose
    advance_cells: int


def execute(world: GridWorld, pose: RobotPose, action: str, stride: int = 1) -> ExecutionResult:
    """Apply a discrete action; forward motion stops early at walls.

    Turning rotates the heading 90 degrees in place; forward advances up to
    ``stride`` free cells, transitioning floors when stepping forward from a
    stair cell.  The result never lands on a wall.
    """
    if action == "stop":
        return ExecutionResult(pose, 0)
    if action == "turn left":
        return ExecutionResult(replace(pose, heading=_LEFT_OF[pose.heading]), 0)
    if action == "turn right":
        return ExecutionResult(replace(pose, heading=_RIGHT_OF[pose.heading]), 0)
    if action != "move forward":
        raise ValueError(f"unknown action {action!r}")

    floor, cell, heading = pose.floor, pose.cell, pose.heading
    advance = 0
    for _ in range(stride):
        hx, hy = _HEADING_VEC[heading]
        nxt = (cell[0] + hx, cell[1] + hy)
        if world.is_free(floor, nxt):
            cell = nxt
            advance += 1
            continue
        # Blocked ahead: a stair cell hands the robot to its linked floor.
        link = world.stair_from(floor, cell)
        if link is None:
            break
        floor, cell = link.target[0], (link.target[1], link.target[2])
        advance += 1
    return ExecutionResult(RobotPose(cell=cell, heading=heading, floor=floor), advance)


# --- ground-truth sketches and distortion -----------------------------------


def _simplify(points: "list[tuple[float, float]]") -> list[tuple[float, float]]:
    """Drop interior points that do not change direction."""
    if len(points) <= 2:
        return points
    out = [points[0]]
    for prev, cur, nxt in zip(points, points[1:], points[2:]):
        v1 = (cur[0] - prev[0], cur[1] - prev[1])
        v2 = (nxt[0] - cur[0], nxt[1] - cur[1])
        if v1[0] * v2[1] - v1[1] * v2[0] != 0 or (v1[0] * v2[0] + v1[1] * v2[1]) < 0:
            out.append(cur)
    out.append(points[-1])
    return out


def pane_offsets(world: GridWorld, px_per_cell: int = DEFAULT_PX_PER_CELL) -> list[int]:
    offsets = [0]
    for f in range(len(world.floors) - 1):
        cols, _ = world.floor_size(f)
        offsets.append(offsets[-1] + cols * px_per_cell)
    return offsets


def ground_truth_sketch(world: GridWorld,
                        px_per_cell: int = DEFAULT_PX_PER_CELL) -> HandDrawnMap:
    """Render the idealized hand-drawn map of a world.

    Floors are drawn side by side as vertical panes; the path follows the
    BFS shortest route from start to goal, landmarks keep their legend
    labels, and start/goal get the usual circle/triangle marks.
    """
    offsets = pane_offsets(world, px_per_cell)
    total_w = offsets[-1] + world.floor_size(len(world.floors) - 1)[0] * px_per_cell
    total_h = max(world.floor_size(f)[1] for f in range(len(world.floors))) * px_per_cell

    img = Image.new("RGB", (total_w, total_h), (255, 255, 255))
    draw = ImageDraw.Draw(img)

    def center(floor: int, cell: tuple[int, int]) -> tuple[float, float]:
        return (offsets[floor] + (cell[0] + 0.5) * px_per_cell,
                (cell[1] + 0.5) * px_per_cell)

    for f, grid in enumerate(world.floors):
        for r in range(grid.shape[0]):
            for c in range(grid.shape[1]):
                if not grid[r, c] and not _is_landmark_cell(world, f, (c, r)):
                    x0 = offsets[f] + c * px_per_cell
                    y0 = r * px_per_cell
                    draw.rectangle([x0, y0, x0 + px_per_cell - 1, y0 + px_per_cell - 1],
                                   fill=(210, 210, 210))

    cells = shortest_path(world)
    if cells is None:
        raise DisconnectedStartGoal(f"world {world.name}: goal unreachable")
    pts = _simplify([center(f, (c, r)) for f, c, r in cells])
    draw.line(pts, fill=(220, 40, 40), width=2)
    sx, sy = pts[0]
    gx, gy = pts[-1]
    draw.ellipse([sx - 4, sy - 4, sx + 4, sy + 4], outline=(220, 40, 40), width=2)
    draw.polygon([(gx, gy - 5), (gx - 5, gy + 4), (gx + 5, gy + 4)], outline=(220, 40, 40))

    annotations: list[LandmarkAnnotation] = []
    for lm in world.landmarks:
        x, y = center(lm.floor, lm.cell)
        draw.ellipse([x - 3, y - 3, x + 3, y + 3], fill=(30, 30, 30))
        draw.text((x + 4, y - 10), lm.label, fill=(30, 30, 30))
        annotations.append(LandmarkAnnotation(label=lm.label, position=(x, y), floor=lm.floor))

    panes = tuple(
        FloorPane(floor=f, x_min=float(offsets[f]),
                  x_max=float(offsets[f] + world.floor_size(f)[0] * px_per_cell))
        for f in range(len(world.floors))
    ) if len(world.floors) > 1 else ()

    return HandDrawnMap(drawing=np.asarray(img), landmarks=tuple(annotations),
                        path=tuple(pts), floor_panes=panes)


def _is_landmark_cell(world: GridWorld, floor: int, cell: tuple[int, int]) -> bool:
    return any(lm.floor == floor and lm.cell == cell for lm in world.landmarks)


@dataclass(frozen=True)
class DistortionConfig:
    """Hand-drawn-map error model: positional jitter, landmark omission
    and per-axis scale warping, all seeded."""

    jitter_sigma: float = 0.0      # fraction of the drawing diagonal
    omission_rate: float = 0.0
    scale_warp: tuple[float, float] = (1.0, 1.0)  # uniform range per axis
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.omission_rate <= 1.0):
            raise ValueError("omission_rate must be in [0, 1]")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        lo, hi = self.scale_warp
        if not (0 < lo <= hi):
            raise ValueError("scale_warp must be an increasing positive range")


def distort(world: GridWorld, sketch: HandDrawnMap, config: DistortionConfig) -> HandDrawnMap:
    """Apply the sketch error model: warp axes, drop landmarks, jitter points.

    Landmark positions get per-axis normal noise with sigma =
    ``jitter_sigma`` x diagonal; path vertices use sigma/2; each landmark is
    independently dropped with probability ``omission_rate``.  Path
    endpoints are never removed.  Fully seeded and reproducible.
    """
    rng = np.random.default_rng(config.seed)

    wx = float(rng.uniform(*config.scale_warp))
    wy = float(rng.uniform(*config.scale_warp))
    old_h, old_w = sketch.drawing.shape[:2]
    new_w, new_h = max(2, round(old_w * wx)), max(2, round(old_h * wy))
    sx, sy = new_w / old_w, new_h / old_h
    drawing = np.asarray(
        Image.fromarray(sketch.drawing).resize((new_w, new_h), Image.BILINEAR)
    )

    def clamp(x: float, lo: float, hi: float) -> float:
        return min(max(x, lo), hi)

    sigma = config.jitter_sigma * math.hypot(new_w, new_h)
    kept: list[LandmarkAnnotation] = []
    for lm in sketch.landmarks:
        if rng.random() < config.omission_rate:
            continue
        jx, jy = rng.normal(0.0, sigma, size=2) if sigma > 0 else (0.0, 0.0)
        kept.append(LandmarkAnnotation(
            label=lm.label,
            position=(clamp(lm.position[0] * sx + jx, 0, new_w - 1),
                      clamp(lm.position[1] * sy + jy, 0, new_h - 1)),
            floor=lm.floor,
        ))

    path = []
    for x, y in sketch.path:
        jx, jy = rng.normal(0.0, sigma / 2, size=2) if sigma > 0 else (0.0, 0.0)
        path.append((clamp(x * sx + jx, 0, new_w - 1), clamp(y * sy + jy, 0, new_h - 1)))

    panes = tuple(
        FloorPane(floor=p.floor, x_min=p.x_min * sx, x_max=p.x_max * sx)
        for p in sketch.floor_panes
    )
    _ = world
    return HandDrawnMap(drawing=drawing, landmarks=tuple(kept), path=tuple(path),
                        floor_panes=panes)


# --- metrics ----------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    success: bool
    spl: float
    distance_m: float
    steps: int
    backend_latency_s: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.spl <= 1.0):
            raise ValueError(f"spl out of range: {self.spl}")
        if not self.success and self.spl != 0.0:
            raise ValueError("spl must be 0 on failure")

    def summary_line(self) -> str:
        return (f"SR={int(self.success)} SPL={self.spl:.3f} "
                f"D={self.distance_m:.2f} STEPS={self.steps}")


GOAL_TOLERANCE_M = 0.5


def metrics(trace, world: GridWorld, spl_ref: str = "shortest",
            sketch_ref_m: "float | None" = None) -> Metrics:
    """Compute episode metrics from a finished trace.

    ``trace`` must expose ``terminal_pose``, ``traveled_cells``, ``steps``
    and ``backend_latency_s``.  Success means the terminal pose lies within
    0.5 m of the goal center on the goal floor; SPL weights success by
    reference path length over max(traveled, reference).  The reference is
    the BFS shortest path, or the sketched path when ``spl_ref='sketch'``
    (with ``sketch_ref_m`` supplying its metric length).
    """
    pose: RobotPose = trace.terminal_pose
    dist_to_goal = math.dist(pose.cell, world.goal) * world.cell_size
    success = pose.floor == world.goal_floor and dist_to_goal <= GOAL_TOLERANCE_M

    if spl_ref == "sketch" and sketch_ref_m is not None:
        reference = sketch_ref_m
    else:
        reference = shortest_path_length_m(world)
    traveled = trace.traveled_cells * world.cell_size
    spl = reference / max(traveled, reference) if success and reference > 0 else 0.0
    if success and traveled == 0 and reference == 0:
        spl = 1.0
    return Metrics(success=success, spl=spl, distance_m=traveled, steps=trace.steps,
                   backend_latency_s=trace.backend_latency_s)


def derive_cooccurrence(world: GridWorld,
                        px_per_cell: int = DEFAULT_PX_PER_CELL) -> dict[str, list[str]]:
    """Build co-occurrence rules from a world's landmark layout.

    Labels anchored to the same route node co-occur, and each label also
    implies the labels of the adjacent route nodes, so an omitted landmark
    can be inferred from either its facing partner or its neighbors along
    the route.
    """
    from . import topomap

    sketch = ground_truth_sketch(world, px_per_cell)
    cells = shortest_path(world)
    hops = max(len(cells) - 1, 1) if cells else 1
    from .sketchmap import path_length

    topo = topomap.build(sketch, node_interval=path_length(sketch.path) / hops)
    per_node: list[list[str]] = []
    for node in topo.robot_nodes:
        per_node.append(sorted(
            lm.label for lm in topo.landmark_nodes if topo.association(lm) == node.id
        ))
    rules: dict[str, set] = {}
    for k, labels in enumerate(per_node):
        neighbors = per_node[k - 1] if k > 0 else []
        nxt = per_node[k + 1] if k + 1 < len(per_node) else []
        for label in labels:
            related = rules.setdefault(label, set())
            related.update(o for o in labels if o != label)
            related.update(neighbors)
            related.update(nxt)
    return {k: sorted(v) for k, v in sorted(rules.items())}


# --- packaged fixture worlds -------------------------------------------------


def worlds_dir() -> Path:
    return Path(__file__).parent / "worlds"


def fixture_world_names() -> list[str]:
    return sorted(p.stem for p in worlds_dir().glob("*.json"))


def load_fixture_world(name: str) -> GridWorld:
    path = worlds_dir() / f"{name}.json"
    if not path.is_file():
        raise SchemaError(f"no fixture world named {name!r}")
    return load_world(path)
