"""Deterministic per-view perception: quadrant mapping, structural turn
detection on traversable masks, view annotation, and pinhole projection.

Object detection and pixel-level segmentation are interfaces here; the
simulator supplies ground-truth objects and synthetic masks, and a real
deployment can plug in external detectors behind the same contracts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import cv2
import numpy as np
from PIL import Image, ImageDraw

from .errors import EmptyMask, NonPositiveDepth

QUADRANTS = ("left", "front", "right")

OBJECT_BOX_COLOR = (255, 105, 180)   # pink
STRUCTURAL_BOX_COLOR = (0, 200, 0)   # green

# Angle bins for edge categories, degrees from the image x-axis with the
# visual convention (y up): "/" segments have positive angle.
HORIZONTAL_MAX_DEG = 15.0
VERTICAL_MIN_DEG = 75.0


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate bbox {self}")

    @property
    def center_x(self) -> float:
        return (self.x_min + self.x_max) / 2.0

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def union(self, other: "BoundingBox") -> "BoundingBox":
        return BoundingBox(min(self.x_min, other.x_min), min(self.y_min, other.y_min),
                           max(self.x_max, other.x_max), max(self.y_max, other.y_max))

    def intersection_area(self, other: "BoundingBox") -> float:
        w = min(self.x_max, other.x_max) - max(self.x_min, other.x_min)
        h = min(self.y_max, other.y_max) - max(self.y_min, other.y_min)
        return w * h if w > 0 and h > 0 else 0.0


@dataclass(frozen=True)
class DetectedObject:
    label: str
    bbox: BoundingBox


@dataclass(frozen=True)
class DetectedTurn:
    direction: str  # "left" | "right"
    bbox: BoundingBox


@dataclass(frozen=True)
class Observation:
    """One egocentric percept: detected objects, plus optional traversable
    mask, depth, view image, and structural turn detections."""

    width: int
    height: int
    objects: tuple[DetectedObject, ...] = ()
    mask: np.ndarray | None = None        # (H, W) uint8, 0 / 255
    depth: np.ndarray | None = None       # (H, W) float meters
    view_image: np.ndarray | None = None  # (H, W, 3) uint8
    turns: tuple[DetectedTurn, ...] = ()

    def __post_init__(self) -> None:
        for obj in self.objects:
            b = obj.bbox
            if b.x_min < 0 or b.y_min < 0 or b.x_max > self.width or b.y_max > self.height:
                raise ValueError(f"bbox {b} outside {self.width}x{self.height} view")
        for raster, name in ((self.mask, "mask"), (self.depth, "depth")):
            if raster is not None and raster.shape[:2] != (self.height, self.width):
                raise ValueError(f"{name} shape {raster.shape} != view {self.height}x{self.width}")


class Detector(Protocol):
    """Object detector contract: image in, labeled boxes out."""

    def detect(self, image: np.ndarray) -> list[DetectedObject]: ...


@dataclass(frozen=True)
class LdictEntry:
    label: str
    quadrant: str


def assign_quadrants(observation: Observation) -> list[LdictEntry]:
    """Map each detected object to the left/front/right third of the view.

    The quadrant is decided solely by the bbox center x: left when
    center < W/3, front when W/3 <= center < 2W/3, right otherwise.
    Input order is preserved.
    """
    w = observation.width
    entries = []
    for obj in observation.objects:
        cx = obj.bbox.center_x
        if cx < w / 3.0:
            quadrant = "left"
        elif cx < 2.0 * w / 3.0:
            quadrant = "front"
        else:
            quadrant = "right"
        entries.append(LdictEntry(label=obj.label, quadrant=quadrant))
    return entries


@dataclass(frozen=True)
class LineSegment:
    x1: float
    y1: float
    x2: float
    y2: float
    angle_deg: float  # visual convention, y up, normalized to (-90, 90]

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)

    @property
    def min_x(self) -> float:
        return min(self.x1, self.x2)

    @property
    def max_x(self) -> float:
        return max(self.x1, self.x2)

    def bbox(self) -> BoundingBox:
        return BoundingBox(min(self.x1, self.x2) - 1, min(self.y1, self.y2) - 1,
                           max(self.x1, self.x2) + 1, max(self.y1, self.y2) + 1)


@dataclass(frozen=True)
class EdgeSet:
    horizontal: tuple[LineSegment, ...] = ()
    vertical: tuple[LineSegment, ...] = ()
    positive_slope: tuple[LineSegment, ...] = ()
    negative_slope: tuple[LineSegment, ...] = ()


@dataclass(frozen=True)
class HoughParams:
    rho: float = 1.0
    theta_deg: float = 1.0
    threshold: int = 18
    min_line_length: int = 18
    max_line_gap: int = 6
    border_margin: int = 3


def segment_angle(x1: float, y1: float, x2: float, y2: float) -> float:
    """Unoriented segment angle in degrees, visual convention (y up),
    normalized to (-90, 90]."""
    angle = math.degrees(math.atan2(-(y2 - y1), x2 - x1))
    if angle <= -90.0:
        angle += 180.0
    elif angle > 90.0:
        angle -= 180.0
    return angle


def _bin_for_angle(angle: float) -> str:
    if abs(angle) <= HORIZONTAL_MAX_DEG:
        return "horizontal"
    if abs(angle) >= VERTICAL_MIN_DEG:
        return "vertical"
    return "positive_slope" if angle > 0 else "negative_slope"


def extract_edges(mask: np.ndarray, params: HoughParams = HoughParams()) -> EdgeSet:
    """Find line segments on the boundary of the traversable region.

    The mask boundary is computed with a morphological gradient, segments on
    the image border are discarded, and a probabilistic Hough transform
    yields segments that are then binned into horizontal / vertical /
    positive-slope / negative-slope sets by their angle.

    Raises:
        EmptyMask: if the mask has no traversable pixels.
    """
    mask_u8 = (np.asarray(mask) > 0).astype(np.uint8) * 255
    if not mask_u8.any():
        raise EmptyMask("mask has zero traversable pixels")

    kernel = np.ones((3, 3), np.uint8)
    boundary = cv2.morphologyEx(mask_u8, cv2.MORPH_GRADIENT, kernel)
    m = params.border_margin
    boundary[:m, :] = 0
    boundary[-m:, :] = 0
    boundary[:, :m] = 0
    boundary[:, -m:] = 0

    lines = cv2.HoughLinesP(
        boundary,
        rho=params.rho,
        theta=math.radians(params.theta_deg),
        threshold=params.threshold,
        minLineLength=params.min_line_length,
        maxLineGap=params.max_line_gap,
    )
    bins: dict[str, list[LineSegment]] = {
        "horizontal": [], "vertical": [], "positive_slope": [], "negative_slope": []
    }
    if lines is not None:
        for (x1, y1, x2, y2) in np.asarray(lines).reshape(-1, 4):
            angle = segment_angle(float(x1), float(y1), float(x2), float(y2))
            seg = LineSegment(float(x1), float(y1), float(x2), float(y2), angle)
            bins[_bin_for_angle(angle)].append(seg)
    return EdgeSet(
        horizontal=tuple(bins["horizontal"]),
        vertical=tuple(bins["vertical"]),
        positive_slope=tuple(bins["positive_slope"]),
        negative_slope=tuple(bins["negative_slope"]),
    )


def _segment_gap(a: LineSegment, b: LineSegment) -> float:
    """Minimum distance between two segments."""
    pa = np.array([[a.x1, a.y1], [a.x2, a.y2]])
    pb = np.array([[b.x1, b.y1], [b.x2, b.y2]])

    def point_seg(p, s0, s1):
        v = s1 - s0
        denom = float(v @ v)
        if denom == 0:
            return float(np.linalg.norm(p - s0))
        t = max(0.0, min(1.0, float((p - s0) @ v) / denom))
        return float(np.linalg.norm(p - (s0 + t * v)))

    if _segments_cross(pa[0], pa[1], pb[0], pb[1]):
        return 0.0
    return min(
        point_seg(pa[0], pb[0], pb[1]), point_seg(pa[1], pb[0], pb[1]),
        point_seg(pb[0], pa[0], pa[1]), point_seg(pb[1], pa[0], pa[1]),
    )


def _segments_cross(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p3, p4, p1), orient(p3, p4, p2)
    d3, d4 = orient(p1, p2, p3), orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _extends_outward(h: LineSegment, flank: LineSegment, side: str) -> bool:
    """True when the horizontal edge grows away from the corridor at its
    meeting point with the flank: leftward for a left opening, rightward for
    a right one.  The far wall touches flanks at its own ends and extends
    inward, which this rejects."""
    left_end, right_end = sorted([(h.x1, h.y1), (h.x2, h.y2)])
    flank_ends = [(flank.x1, flank.y1), (flank.x2, flank.y2)]

    def end_dist(end):
        return min(math.dist(end, fp) for fp in flank_ends)

    near_left = end_dist(left_end) < end_dist(right_end)
    return near_left if side == "right" else not near_left


def classify_turns(edges: EdgeSet, width: int, height: int,
                   tolerance_frac: float = 0.02) -> list[DetectedTurn]:
    """Classify left/right turns from edge intersection patterns.

    A left turn is a horizontal segment lying in the left half of the view
    that intersects or abuts (gap <= 2% of width) a positive-slope segment
    while extending leftward from the meeting point; a right turn is the
    mirrored pattern with a negative-slope segment in the right half.
    Same-direction detections whose lateral extents overlap by at least
    half the smaller one (the near and far edges of one opening) merge into
    a single turn.
    """
    eps = tolerance_frac * width
    half = width / 2.0
    raw: list[DetectedTurn] = []
    for h in edges.horizontal:
        if h.max_x <= half + eps:  # entirely in the left half
            for p in edges.positive_slope:
                if _segment_gap(h, p) <= eps and _extends_outward(h, p, "left"):
                    raw.append(DetectedTurn("left", h.bbox().union(p.bbox())))
        if h.min_x >= half - eps:  # entirely in the right half
            for n in edges.negative_slope:
                if _segment_gap(h, n) <= eps and _extends_outward(h, n, "right"):
                    raw.append(DetectedTurn("right", h.bbox().union(n.bbox())))
    return _merge_turns(raw)


def _merge_turns(turns: list[DetectedTurn]) -> list[DetectedTurn]:
    merged: list[DetectedTurn] = []
    for turn in turns:
        for i, kept in enumerate(merged):
            if kept.direction != turn.direction:
                continue
            overlap = (min(kept.bbox.x_max, turn.bbox.x_max)
                       - max(kept.bbox.x_min, turn.bbox.x_min))
            smaller = min(kept.bbox.x_max - kept.bbox.x_min,
                          turn.bbox.x_max - turn.bbox.x_min)
            if overlap >= 0.5 * smaller:
                merged[i] = DetectedTurn(kept.direction, kept.bbox.union(turn.bbox))
                break
        else:
            merged.append(turn)
    merged.sort(key=lambda t: (t.direction, t.bbox.x_min))
    return merged


def detect_turns(mask: np.ndarray, params: HoughParams = HoughParams()) -> list[DetectedTurn]:
    """Full structural-landmark pass: edges from the mask, then turn rules."""
    h, w = np.asarray(mask).shape[:2]
    return classify_turns(extract_edges(mask, params), w, h)


def annotate_view(view_image: np.ndarray, objects: "tuple[DetectedObject, ...] | list[DetectedObject]",
                  turns: "tuple[DetectedTurn, ...] | list[DetectedTurn]") -> np.ndarray:
    """Draw object boxes (pink) and structural turn boxes (green), with a
    label above each box.  Pixel output is deterministic for fixed inputs."""
    img = Image.fromarray(np.asarray(view_image, dtype=np.uint8).copy())
    draw = ImageDraw.Draw(img)
    for obj in objects:
        _draw_box(draw, obj.bbox, OBJECT_BOX_COLOR, obj.label, img.height)
    for turn in turns:
        _draw_box(draw, turn.bbox, STRUCTURAL_BOX_COLOR, f"{turn.direction} turn", img.height)
    return np.asarray(img)


def _draw_box(draw: ImageDraw.ImageDraw, bbox: BoundingBox, color: tuple[int, int, int],
              label: str, img_height: int) -> None:
    draw.rectangle([bbox.x_min, bbox.y_min, bbox.x_max, bbox.y_max], outline=color, width=2)
    ty = bbox.y_min - 12
    if ty < 0:
        ty = min(bbox.y_max + 2, img_height - 12)
    draw.text((bbox.x_min + 2, ty), label, fill=color)


def project_pixel(pixel: tuple[float, float], depth_m: float,
                  intrinsics: tuple[float, float, float, float]) -> tuple[float, float, float]:
    """Pinhole back-projection of a pixel at a known depth into the camera
    frame: X = (u - cx) * Z / fx, Y = (v - cy) * Z / fy, Z = depth.

    Raises:
        NonPositiveDepth: if ``depth_m`` is not > 0.
    """
    if depth_m <= 0:
        raise NonPositiveDepth(f"depth must be > 0, got {depth_m}")
    fx, fy, cx, cy = intrinsics
    if fx <= 0 or fy <= 0:
        raise ValueError("focal lengths must be > 0")
    u, v = pixel
    z = float(depth_m)
    return ((u - cx) * z / fx, (v - cy) * z / fy, z)


def reproject_point(point: tuple[float, float, float],
                    intrinsics: tuple[float, float, float, float]) -> tuple[float, float]:
    """Forward pinhole projection; inverse of :func:`project_pixel`."""
    fx, fy, cx, cy = intrinsics
    x, y, z = point
    if z <= 0:
        raise NonPositiveDepth(f"point depth must be > 0, got {z}")
    return (x * fx / z + cx, y * fy / z + cy)
