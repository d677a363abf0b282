"""Sketch bundle parsing and path geometry.

A sketch bundle is a directory (or zip) holding ``map.png`` — the raster
drawing — and ``annotations.json``::

    {
      "version": 1,
      "landmarks": [{"label": "chair", "x": 120, "y": 88, "floor": 0}, ...],
      "path": [[x, y], ...],
      "floors": [{"floor": 0, "x_min": 0, "x_max": 320}, ...]   # optional
    }

The optional ``floors`` key partitions the drawing into vertical panes, one
per floor, for sketches that draw multiple floors side by side.  Pixel
coordinates use x rightward, y downward, origin at the top-left corner.
"""

from __future__ import annotations

import io
import json
import logging
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    MissingImage,
    MissingPath,
    OutOfBoundsCoordinate,
    PathTooShort,
    UnsupportedVersion,
    ZeroLengthPath,
)

logger = logging.getLogger(__name__)

SUPPORTED_VERSIONS = (1,)

KNOWN_TOP_KEYS = {"version", "landmarks", "path", "floors"}
KNOWN_LANDMARK_KEYS = {"label", "x", "y", "floor"}

Point = tuple[float, float]


@dataclass(frozen=True)
class LandmarkAnnotation:
    """A labeled landmark pinned to a pixel position in the drawing."""

    label: str
    position: Point
    floor: int = 0

    def __post_init__(self) -> None:
        if not self.label.strip():
            raise ValueError("landmark label must be non-empty")
        x, y = self.position
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"landmark position must be finite, got {self.position}")


@dataclass(frozen=True)
class FloorPane:
    """Vertical strip of the drawing belonging to one floor."""

    floor: int
    x_min: float
    x_max: float


@dataclass(frozen=True)
class HandDrawnMap:
    """A parsed hand-drawn map: drawing, labeled landmarks, and a path.

    The path is an ordered pixel polyline; its first vertex is the start
    position and its last vertex is the goal position.
    """

    drawing: np.ndarray  # (H, W, 3) uint8
    landmarks: tuple[LandmarkAnnotation, ...]
    path: tuple[Point, ...]
    floor_panes: tuple[FloorPane, ...] = field(default_factory=tuple)

    @property
    def start(self) -> Point:
        return self.path[0]

    @property
    def goal(self) -> Point:
        return self.path[-1]

    @property
    def width(self) -> int:
        return self.drawing.shape[1]

    @property
    def height(self) -> int:
        return self.drawing.shape[0]

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def floor_at(self, point: Point) -> int:
        """Floor of the pane containing ``point`` (0 when no panes declared)."""
        for pane in self.floor_panes:
            if pane.x_min <= point[0] < pane.x_max:
                return pane.floor
        return self.floor_panes[-1].floor if self.floor_panes else 0

    def to_annotations_dict(self) -> dict:
        """Serialize annotations back to the bundle JSON schema."""
        out: dict = {
            "version": 1,
            "landmarks": [
                {"label": lm.label, "x": lm.position[0], "y": lm.position[1], "floor": lm.floor}
                for lm in self.landmarks
            ],
            "path": [[x, y] for x, y in self.path],
        }
        if self.floor_panes:
            out["floors"] = [
                {"floor": p.floor, "x_min": p.x_min, "x_max": p.x_max} for p in self.floor_panes
            ]
        return out


def _load_bundle_files(source: str | Path | bytes) -> tuple[bytes, dict]:
    """Return (png_bytes, annotations) from a directory, zip path, or zip bytes."""
    if isinstance(source, bytes):
        try:
            zf = zipfile.ZipFile(io.BytesIO(source))
        except zipfile.BadZipFile as exc:
            raise MissingImage(f"bundle bytes are not a zip archive: {exc}") from exc
        return _load_from_zip(zf)

    path = Path(source)
    if path.is_dir():
        png_path = path / "map.png"
        ann_path = path / "annotations.json"
        if not png_path.is_file():
            raise MissingImage(f"no map.png in bundle directory {path}")
        if not ann_path.is_file():
            raise MissingPath(f"no annotations.json in bundle directory {path}")
        return png_path.read_bytes(), json.loads(ann_path.read_text())
    if path.is_file():
        try:
            zf = zipfile.ZipFile(path)
        except zipfile.BadZipFile as exc:
            raise MissingImage(f"{path} is neither a bundle directory nor a zip: {exc}") from exc
        return _load_from_zip(zf)
    raise MissingImage(f"bundle source {path} does not exist")


def _load_from_zip(zf: zipfile.ZipFile) -> tuple[bytes, dict]:
    names = {Path(n).name: n for n in zf.namelist() if not n.endswith("/")}
    if "map.png" not in names:
        raise MissingImage("zip bundle has no map.png")
    if "annotations.json" not in names:
        raise MissingPath("zip bundle has no annotations.json")
    png = zf.read(names["map.png"])
    ann = json.loads(zf.read(names["annotations.json"]).decode("utf-8"))
    return png, ann


def parse_bundle(source: str | Path | bytes) -> HandDrawnMap:
    """Parse and validate a sketch bundle into a HandDrawnMap.

    Args:
        source: bundle directory path, zip file path, or raw zip bytes.

    Raises:
        MissingImage, MissingPath, PathTooShort, OutOfBoundsCoordinate,
        UnsupportedVersion: on the corresponding validation failure.
    """
    png_bytes, ann = _load_bundle_files(source)

    try:
        img = Image.open(io.BytesIO(png_bytes)).convert("RGB")
    except Exception as exc:
        raise MissingImage(f"map.png could not be decoded: {exc}") from exc
    drawing = np.asarray(img, dtype=np.uint8)
    height, width = drawing.shape[:2]
    if width <= 0 or height <= 0:
        raise MissingImage("map.png has zero area")

    version = ann.get("version")
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersion(f"annotations version {version!r} not in {SUPPORTED_VERSIONS}")

    unknown = set(ann) - KNOWN_TOP_KEYS
    if unknown:
        logger.warning("ignoring unknown annotation fields: %s", sorted(unknown))

    raw_path = ann.get("path")
    if raw_path is None:
        raise MissingPath("annotations.json has no 'path' entry")
    if len(raw_path) < 2:
        raise PathTooShort(f"path needs >= 2 vertices, got {len(raw_path)}")
    path: list[Point] = []
    for vertex in raw_path:
        x, y = float(vertex[0]), float(vertex[1])
        if not (0 <= x < width and 0 <= y < height):
            raise OutOfBoundsCoordinate(f"path vertex ({x}, {y}) outside {width}x{height} drawing")
        path.append((x, y))

    landmarks: list[LandmarkAnnotation] = []
    for entry in ann.get("landmarks", []):
        extra = set(entry) - KNOWN_LANDMARK_KEYS
        if extra:
            logger.warning("ignoring unknown landmark fields: %s", sorted(extra))
        x, y = float(entry["x"]), float(entry["y"])
        if not (0 <= x < width and 0 <= y < height):
            raise OutOfBoundsCoordinate(
                f"landmark {entry.get('label')!r} at ({x}, {y}) outside {width}x{height} drawing"
            )
        landmarks.append(
            LandmarkAnnotation(label=str(entry["label"]), position=(x, y), floor=int(entry.get("floor", 0)))
        )

    panes = tuple(
        FloorPane(floor=int(f["floor"]), x_min=float(f["x_min"]), x_max=float(f["x_max"]))
        for f in ann.get("floors", [])
    )

    return HandDrawnMap(drawing=drawing, landmarks=tuple(landmarks), path=tuple(path), floor_panes=panes)


def write_bundle(hmap: HandDrawnMap, dest: str | Path) -> Path:
    """Write ``hmap`` back out as a bundle directory; returns the directory path."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    Image.fromarray(hmap.drawing).save(dest / "map.png")
    (dest / "annotations.json").write_text(json.dumps(hmap.to_annotations_dict(), indent=2))
    return dest


def bundle_zip_bytes(hmap: HandDrawnMap) -> bytes:
    """Serialize ``hmap`` to in-memory zip-bundle bytes."""
    buf = io.BytesIO()
    png = io.BytesIO()
    Image.fromarray(hmap.drawing).save(png, format="PNG")
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("map.png", png.getvalue())
        zf.writestr("annotations.json", json.dumps(hmap.to_annotations_dict()))
    return buf.getvalue()


def path_length(polyline: "list[Point] | tuple[Point, ...]") -> float:
    """Total arc length of a polyline in pixels."""
    return float(
        sum(math.dist(a, b) for a, b in zip(polyline, polyline[1:]))
    )


def resample_path(polyline: "list[Point] | tuple[Point, ...]", interval: float) -> list[Point]:
    """Resample a polyline at fixed arc-length spacing.

    Output points sit every ``interval`` pixels of arc length along the
    polyline, always including both endpoints; the final gap may be shorter
    than ``interval`` but never longer.

    Raises:
        ZeroLengthPath: if the polyline's total arc length is zero.
    """
    if len(polyline) < 2:
        raise ValueError("polyline needs >= 2 vertices")
    if interval <= 0:
        raise ValueError("interval must be > 0")

    total = path_length(polyline)
    if total == 0:
        raise ZeroLengthPath("polyline has zero arc length")

    samples: list[Point] = [tuple(map(float, polyline[0]))]
    target = interval
    walked = 0.0
    for a, b in zip(polyline, polyline[1:]):
        seg = math.dist(a, b)
        if seg == 0:
            continue
        while target <= walked + seg:
            t = (target - walked) / seg
            samples.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
            target += interval
        walked += seg
    end = tuple(map(float, polyline[-1]))
    if len(samples) == 1 or math.dist(samples[-1], end) > 1e-9:
        samples.append(end)
    else:
        samples[-1] = end
    return samples
