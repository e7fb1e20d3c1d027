"""Synthetic tabletop scenes: a flat table with one raised box per scene,
labeled with positive grasps across the box's narrow side and negative
rectangles on empty table. Used for the bundled 20-scene fixture, demos
and the end-to-end tests.

For the 20-scene default the written dataset contains exactly 116 positive
and 66 negative rectangles (roughly 885:5110:2909 scaled down).
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .cornell_data import DepthImage, SceneRecord, write_scene
from .grasp_geometry import GraspRectangle, fold_angle

TABLE_DEPTH_M = 0.75
BOX_RAISE_M = 0.05

N_OBJECTS = 8


def _paint_box(values, center, angle, long_px, short_px, raise_m):
    h, w = values.shape
    vv, uu = np.mgrid[0:h, 0:w]
    du = uu - center[0]
    dv = vv - center[1]
    c, s = math.cos(angle), math.sin(angle)
    x = du * c + dv * s
    y = -du * s + dv * c
    inside = (np.abs(x) <= long_px / 2) & (np.abs(y) <= short_px / 2)
    values[inside] = TABLE_DEPTH_M - raise_m


def make_scene(scene_id: str, object_id: str, rng: np.random.Generator,
               h: int = 480, w: int = 640, n_pos: int = 6, n_neg: int = 3,
               invalid_fraction: float = 0.01) -> SceneRecord:
    """One table-plus-box scene with labeled grasp rectangles.

    The box stays inside the center square so preprocessing never crops it
    away. Positive grasp axes run across the box's short side.
    """
    values = np.full((h, w), TABLE_DEPTH_M)
    side = min(h, w)
    cx = w / 2 + rng.uniform(-side * 0.18, side * 0.18)
    cy = h / 2 + rng.uniform(-side * 0.18, side * 0.18)
    angle = rng.uniform(-math.pi / 2, math.pi / 2)
    long_px = rng.uniform(90, 150)
    short_px = rng.uniform(34, 60)
    raise_m = BOX_RAISE_M * rng.uniform(0.8, 1.2)
    _paint_box(values, (cx, cy), angle, long_px, short_px, raise_m)

    # positives: opening across the short side, spread along the long axis
    grasp_axis = fold_angle(angle + math.pi / 2)
    axis_u, axis_v = math.cos(angle), math.sin(angle)
    jaw_h = min(24.0, long_px * 0.35)
    reach = max(long_px / 2 - jaw_h / 2 - 2.0, 1.0)
    pos = []
    for i in range(n_pos):
        t = (i / max(n_pos - 1, 1) - 0.5) * 2 * reach * 0.8
        pos.append(GraspRectangle(
            center=(cx + t * axis_u, cy + t * axis_v),
            angle=grasp_axis,
            width=short_px + 16.0,
            height=jaw_h,
        ))

    # negatives: random rectangles on empty table, away from the box
    neg = []
    guard = (math.hypot(long_px, short_px) + 80.0) / 2
    while len(neg) < n_neg:
        nu = rng.uniform(90, w - 90)
        nv = rng.uniform(90, h - 90)
        if math.hypot(nu - cx, nv - cy) < guard:
            continue
        neg.append(GraspRectangle(
            center=(float(nu), float(nv)),
            angle=float(rng.uniform(-math.pi / 2, math.pi / 2)),
            width=float(rng.uniform(25, 50)),
            height=float(rng.uniform(12, 25)),
        ))

    mask = rng.random((h, w)) >= invalid_fraction
    values = np.where(mask, values, 0.0)
    return SceneRecord(id=scene_id, object_id=object_id,
                       depth=DepthImage(values, mask),
                       pos_rects=pos, neg_rects=neg)


def fixture_quotas(n_scenes: int) -> tuple[list[int], list[int]]:
    """Per-scene positive/negative rectangle counts (exact totals)."""
    pos_extra = round(0.8 * n_scenes)
    neg_extra = round(0.3 * n_scenes)
    pos = [5 + (1 if i < pos_extra else 0) for i in range(n_scenes)]
    neg = [3 + (1 if i < neg_extra else 0) for i in range(n_scenes)]
    return pos, neg


def write_synthetic_dataset(root, n_scenes: int = 20, seed: int = 20240831,
                            h: int = 480, w: int = 640):
    """Write a synthetic dataset in the standard layout; returns the exact
    (n_scenes, n_pos, n_neg) counts it produced."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    pos_quota, neg_quota = fixture_quotas(n_scenes)
    manifest = []
    for i in range(n_scenes):
        scene_id = f"scene{i:04d}"
        object_id = f"obj{(i * N_OBJECTS) // n_scenes:02d}"
        rng = np.random.default_rng([seed, i])
        rec = make_scene(scene_id, object_id, rng, h=h, w=w,
                         n_pos=pos_quota[i], n_neg=neg_quota[i])
        write_scene(root, rec)
        manifest.append((scene_id, object_id))
    with open(root / "objects.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scene_id", "object_id"])
        writer.writerows(manifest)
    return n_scenes, sum(pos_quota), sum(neg_quota)
