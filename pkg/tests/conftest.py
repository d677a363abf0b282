"""Shared fixtures: sketch bundles, mini worlds, and mask drawing helpers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image, ImageDraw

from hamnav.reasoning import OracleRules
from hamnav.simulator import world_from_dict


def make_bundle(tmp_path: Path, width=200, height=120, landmarks=None, path=None,
                version=1, extra=None) -> Path:
    """Author a sketch bundle directory with known contents."""
    bundle = tmp_path / "bundle"
    bundle.mkdir(exist_ok=True)
    Image.new("RGB", (width, height), (255, 255, 255)).save(bundle / "map.png")
    ann = {
        "version": version,
        "landmarks": landmarks if landmarks is not None else [],
        "path": path if path is not None else [[10, 60], [190, 60]],
    }
    if extra:
        ann.update(extra)
    (bundle / "annotations.json").write_text(json.dumps(ann))
    return bundle


@pytest.fixture
def bundle_dir(tmp_path):
    landmarks = [
        {"label": "chair", "x": 30, "y": 20},
        {"label": "desk", "x": 60, "y": 100},
        {"label": "door", "x": 120, "y": 30, "floor": 0},
        {"label": "plant", "x": 150, "y": 90},
        {"label": "shelf", "x": 180, "y": 50},
    ]
    path = [[10 + 16 * i, 60] for i in range(12)]
    return make_bundle(tmp_path, landmarks=landmarks, path=path)


def mini_world(rows, legend=None, cell_size=0.5, heading="E", stairs=None, name="mini"):
    data = {
        "name": name,
        "cell_size": cell_size,
        "heading": heading,
        "legend": legend or {},
        "floors": [{"rows": rows}] if isinstance(rows[0], str) else [{"rows": r} for r in rows],
    }
    if stairs:
        data["stairs"] = stairs
    return world_from_dict(data)


@pytest.fixture
def corridor5():
    """Five-cell straight corridor with a landmark beside every path cell."""
    return mini_world(
        [
            "#acege#",
            "#S...Gz",
            "#bdfh##",
        ],
        legend={"a": "box", "b": "cone", "c": "mat", "d": "bag", "e": "jar",
                "g": "cap", "f": "pin", "h": "rod", "z": "door"},
        name="corridor5",
    )


@pytest.fixture
def corridor5_rules():
    return OracleRules(co_occurrence={
        "box": ["cone"], "cone": ["box"], "mat": ["bag"], "bag": ["mat"],
        "jar": ["pin"], "pin": ["jar"], "cap": ["rod"], "rod": ["cap"],
        "door": ["cap"],
    })


def draw_mask(width, height, polygons) -> np.ndarray:
    """Fill polygons (lists of (x, y) vertices) into a binary mask."""
    img = Image.new("L", (width, height), 0)
    draw = ImageDraw.Draw(img)
    for poly in polygons:
        draw.polygon([tuple(p) for p in poly], fill=255)
    return np.asarray(img)


def corridor_trapezoid(width=320, height=240, far_y=120, near_half=0.45, far_half=0.15):
    cx = width / 2
    return [
        (cx - near_half * width, height),
        (cx - far_half * width, far_y),
        (cx + far_half * width, far_y),
        (cx + near_half * width, height),
    ]
