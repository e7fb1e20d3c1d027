"""Grasp dataset ingestion and preprocessing.

On-disk layout (docs/formats.md):

    <root>/<scene-id>d.pgm      16-bit grayscale depth, millimeters, 0 = invalid
    <root>/<scene-id>cpos.txt   positive rectangles, 4 "x y" lines each
    <root>/<scene-id>cneg.txt   negative rectangles, same format
    <root>/objects.csv          scene_id,object_id manifest

Depth preprocessing follows the detection pipeline: inpaint invalid pixels,
crop to the largest center square, resample to the network input size and
mean-center. The returned transform maps label/output coordinates between
the original and processed frames.
"""

from __future__ import annotations

import math
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grasp_geometry import GraspRectangle, fold_angle, rects_from_vertices

IW = "IW"
OW = "OW"


@dataclass
class DepthImage:
    """Depth in meters with a validity mask (False = missing depth)."""

    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("depth image must be 2-D")
        if self.mask is None:
            self.mask = np.ones(self.values.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.values.shape:
                raise ValueError("mask shape must match values")
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ValueError("valid pixels must be finite")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "DepthImage":
        return DepthImage(self.values.copy(), self.mask.copy())


@dataclass
class SceneRecord:
    id: str
    object_id: str
    depth: DepthImage
    pos_rects: list[GraspRectangle] = field(default_factory=list)
    neg_rects: list[GraspRectangle] = field(default_factory=list)


@dataclass(frozen=True)
class AugmentSpec:
    """Random crop/rotate/zoom parameters; a zero spec copies the input."""

    crop_jitter: float = 0.0
    rotation_range: float = 0.0
    zoom_range: tuple[float, float] = (1.0, 1.0)
    count_per_record: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        zmin, zmax = self.zoom_range
        if not (0 < zmin <= zmax):
            raise ValueError("zoom range must satisfy 0 < min <= max")
        if self.count_per_record < 1:
            raise ValueError("count_per_record must be >= 1")


@dataclass(frozen=True)
class DatasetSplit:
    mode: str                   # IW or OW
    folds: int
    assignment: dict            # record id -> fold index

    def fold_ids(self, fold: int) -> list[str]:
        return sorted(rid for rid, f in self.assignment.items() if f == fold)


@dataclass(frozen=True)
class IngestReport:
    n_scenes: int
    n_pos: int
    n_neg: int
    n_skipped_groups: int


# ---------------------------------------------------------------------------
# similarity transforms between pixel frames

@dataclass(frozen=True)
class SimilarityTransform:
    """p' = scale * R(theta) @ p + shift, the transform record returned by
    preprocess/augment so labels can follow the image."""

    scale: float = 1.0
    theta: float = 0.0
    shift: tuple[float, float] = (0.0, 0.0)

    def apply_point(self, p) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        p = np.asarray(p, dtype=float)
        return np.array([
            self.scale * (c * p[0] - s * p[1]) + self.shift[0],
            self.scale * (s * p[0] + c * p[1]) + self.shift[1],
        ])

    def apply_points(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return self.scale * pts @ rot.T + np.asarray(self.shift)

    def apply_rect(self, rect: GraspRectangle) -> GraspRectangle:
        cu, cv = self.apply_point(rect.center)
        return GraspRectangle(center=(float(cu), float(cv)),
                              angle=fold_angle(rect.angle + self.theta),
                              width=rect.width * self.scale,
                              height=rect.height * self.scale)

    def inverse(self) -> "SimilarityTransform":
        inv_scale = 1.0 / self.scale
        c, s = math.cos(-self.theta), math.sin(-self.theta)
        sx, sy = self.shift
        return SimilarityTransform(
            scale=inv_scale, theta=-self.theta,
            shift=(-inv_scale * (c * sx - s * sy), -inv_scale * (s * sx + c * sy)))

    def compose(self, first: "SimilarityTransform") -> "SimilarityTransform":
        """Transform equal to applying `first`, then self."""
        mid = self.apply_point(first.shift)
        return SimilarityTransform(scale=self.scale * first.scale,
                                   theta=self.theta + first.theta,
                                   shift=(float(mid[0]), float(mid[1])))


def warp_depth(img: DepthImage, transform: SimilarityTransform,
               out_shape: tuple[int, int]) -> DepthImage:
    """Resample so out(p') = in(p) under p' = transform(p).

    Bilinear with border replication; output pixels whose bilinear support
    touches an invalid input pixel are marked invalid.
    """
    h, w = out_shape
    inv = transform.inverse()
    vv, uu = np.mgrid[0:h, 0:w].astype(float)
    src = inv.apply_points(np.stack([uu.ravel(), vv.ravel()], axis=1))
    su = np.clip(src[:, 0], 0.0, img.width - 1.0)
    sv = np.clip(src[:, 1], 0.0, img.height - 1.0)
    u0 = np.floor(su).astype(int)
    v0 = np.floor(sv).astype(int)
    u1 = np.minimum(u0 + 1, img.width - 1)
    v1 = np.minimum(v0 + 1, img.height - 1)
    fu = su - u0
    fv = sv - v0
    vals = img.values
    out = ((1 - fu) * (1 - fv) * vals[v0, u0] + fu * (1 - fv) * vals[v0, u1]
           + (1 - fu) * fv * vals[v1, u0] + fu * fv * vals[v1, u1])
    m = img.mask
    mask = m[v0, u0] & m[v0, u1] & m[v1, u0] & m[v1, u1]
    out = np.where(mask, out, 0.0)
    return DepthImage(out.reshape(h, w), mask.reshape(h, w))


# ---------------------------------------------------------------------------
# rectangle files

class RectFileError(ValueError):
    pass


def parse_rect_file(text: str, return_skipped: bool = False):
    """Parse a rectangle file: 4 vertex lines per rectangle.

    Groups containing non-finite coordinates are skipped and counted.
    Raises on non-numeric lines, on a line count not divisible by 4 and on
    lines that are not "x y" pairs.
    """
    points = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise RectFileError(f"line {lineno}: expected 'x y', got {line!r}")
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise RectFileError(f"line {lineno}: non-numeric vertex") from exc
    if len(points) % 4 != 0:
        raise RectFileError(f"{len(points)} vertex lines: truncated final group")
    rects = []
    skipped = 0
    for i in range(0, len(points), 4):
        group = np.array(points[i:i + 4])
        if not np.all(np.isfinite(group)):
            skipped += 1
            continue
        try:
            rects.extend(rects_from_vertices([group]))
        except ValueError:
            skipped += 1       # degenerate geometry counts as skipped
    if return_skipped:
        return rects, skipped
    return rects


# ---------------------------------------------------------------------------
# 16-bit PGM depth files

PGM_COMMENT_KEY = "depth_scale_mm"


def write_depth_pgm(path, img: DepthImage, scale_mm: float = 1.0):
    """Write depth as binary 16-bit PGM; invalid pixels become 0."""
    mm = np.where(img.mask, img.values * 1000.0 / scale_mm, 0.0)
    mm = np.clip(np.round(mm), 0, 65535).astype(">u2")
    # invalid sentinel is 0, so force valid zero-depth up to 1
    mm[img.mask & (mm == 0)] = 1
    header = (f"P5\n# {PGM_COMMENT_KEY} {scale_mm:g}\n"
              f"{img.width} {img.height}\n65535\n")
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(mm.tobytes())


def read_depth_pgm(path) -> DepthImage:
    """Read a binary 16-bit PGM depth file (0 marks invalid pixels)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM file")
    scale_mm = 1.0
    for m in re.finditer(rb"#[^\n]*", data[:4096]):
        comment = m.group().decode("ascii", "replace")
        cm = re.search(rf"{PGM_COMMENT_KEY}\s+([0-9.eE+-]+)", comment)
        if cm:
            scale_mm = float(cm.group(1))
    # strip comments, then take the 4 header tokens
    pos = 2
    tokens = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1    # single whitespace after maxval
    w, h, maxval = int(tokens[0]), int(tokens[1]), int(tokens[2])
    if maxval != 65535:
        raise ValueError(f"{path}: expected 16-bit PGM (maxval 65535)")
    raw = np.frombuffer(data, dtype=">u2", count=w * h, offset=pos).reshape(h, w)
    mask = raw != 0
    values = raw.astype(float) * scale_mm / 1000.0
    values[~mask] = 0.0
    return DepthImage(values, mask)


# ---------------------------------------------------------------------------
# inpainting and preprocessing

def inpaint(d: DepthImage) -> DepthImage:
    """Fill invalid pixels by repeated 4-neighbor mean diffusion.

    Valid input pixels are unchanged; the output mask is fully valid.
    """
    if not d.mask.any():
        raise ValueError("cannot inpaint a fully invalid image")
    values = np.where(d.mask, d.values, 0.0)
    mask = d.mask.copy()
    while not mask.all():
        vm = values * mask
        ssum = np.zeros_like(values)
        cnt = np.zeros_like(values)
        ssum[1:, :] += vm[:-1, :]
        cnt[1:, :] += mask[:-1, :]
        ssum[:-1, :] += vm[1:, :]
        cnt[:-1, :] += mask[1:, :]
        ssum[:, 1:] += vm[:, :-1]
        cnt[:, 1:] += mask[:, :-1]
        ssum[:, :-1] += vm[:, 1:]
        cnt[:, :-1] += mask[:, 1:]
        fill = ~mask & (cnt > 0)
        values[fill] = ssum[fill] / cnt[fill]
        mask |= fill
    return DepthImage(values, mask)


def preprocess(d: DepthImage, out_size: int = 400) -> tuple[DepthImage, SimilarityTransform]:
    """Center-crop to the largest square, resample to out_size and
    mean-center the depth.

    Requires an inpainted (fully valid) input. Returns the processed image
    and the original-frame -> processed-frame pixel transform.
    """
    if out_size < 1:
        raise ValueError("out_size must be >= 1")
    if not d.mask.all():
        raise ValueError("preprocess expects an inpainted image (no invalid pixels)")
    side = min(d.height, d.width)
    off_u = (d.width - side) // 2
    off_v = (d.height - side) // 2
    scale = out_size / side
    transform = SimilarityTransform(scale=scale, theta=0.0,
                                    shift=(-scale * off_u, -scale * off_v))
    warped = warp_depth(d, transform, (out_size, out_size))
    centered = warped.values - warped.values.mean()
    return DepthImage(centered, np.ones_like(centered, dtype=bool)), transform


# ---------------------------------------------------------------------------
# augmentation

def record_rng(rng_seed: int, record_id: str) -> np.random.Generator:
    """Per-record stream so parallel ingestion order never changes outputs."""
    return np.random.default_rng([rng_seed, zlib.crc32(record_id.encode())])


def augment_with_transforms(rec: SceneRecord, spec: AugmentSpec
                            ) -> list[tuple[SceneRecord, SimilarityTransform]]:
    """Like augment, but also returns the similarity applied to each copy."""
    rng = record_rng(spec.rng_seed, rec.id)
    h, w = rec.depth.height, rec.depth.width
    cu, cv = (w - 1) / 2.0, (h - 1) / 2.0
    out = []
    for i in range(spec.count_per_record):
        theta = float(rng.uniform(-spec.rotation_range, spec.rotation_range))
        zoom = float(rng.uniform(spec.zoom_range[0], spec.zoom_range[1]))
        jitter = rng.uniform(-spec.crop_jitter, spec.crop_jitter, size=2) \
            if spec.crop_jitter > 0 else np.zeros(2)
        # rotate and zoom about the image center, then shift by the jitter
        center = SimilarityTransform(scale=zoom, theta=theta)
        pivot = np.asarray([cu, cv]) - center.apply_point([cu, cv])
        transform = SimilarityTransform(
            scale=zoom, theta=theta,
            shift=(float(pivot[0] + jitter[0]), float(pivot[1] + jitter[1])))
        depth = warp_depth(rec.depth, transform, (h, w))

        def move(rects):
            kept = []
            for r in rects:
                moved = transform.apply_rect(r)
                c = moved.corners()
                if (c[:, 0].min() >= 0 and c[:, 1].min() >= 0
                        and c[:, 0].max() <= w - 1 and c[:, 1].max() <= h - 1):
                    kept.append(moved)
            return kept

        out.append((SceneRecord(
            id=f"{rec.id}-aug{i:02d}",
            object_id=rec.object_id,
            depth=depth,
            pos_rects=move(rec.pos_rects),
            neg_rects=move(rec.neg_rects),
        ), transform))
    return out


def augment(rec: SceneRecord, spec: AugmentSpec) -> list[SceneRecord]:
    """count_per_record new records with a shared random similarity applied
    to the depth image (bilinear, border replication) and exactly to every
    rectangle. Rectangles leaving the frame are dropped. Randomness comes
    from a per-record stream, so results do not depend on call order."""
    return [rec_out for rec_out, _ in augment_with_transforms(rec, spec)]


# ---------------------------------------------------------------------------
# splits

def make_splits(records, mode: str, folds: int, rng_seed: int) -> DatasetSplit:
    """Cross-validation folds: IW shuffles records; OW keeps every record of
    an object in one fold."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    records = list(records)
    rng = np.random.default_rng(rng_seed)
    assignment = {}
    if mode == IW:
        ids = sorted(r.id for r in records)
        rng.shuffle(ids)
        for fold, chunk in enumerate(np.array_split(ids, folds)):
            for rid in chunk:
                assignment[str(rid)] = fold
    elif mode == OW:
        by_object = {}
        for r in records:
            by_object.setdefault(r.object_id, []).append(r.id)
        objects = sorted(by_object)
        if len(objects) < folds:
            raise ValueError(f"OW split needs >= {folds} objects, got {len(objects)}")
        rng.shuffle(objects)
        for fold, chunk in enumerate(np.array_split(objects, folds)):
            for obj in chunk:
                for rid in by_object[str(obj)]:
                    assignment[rid] = fold
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    return DatasetSplit(mode=mode, folds=folds, assignment=assignment)


# ---------------------------------------------------------------------------
# dataset directory ingestion

def scene_ids(root) -> list[str]:
    root = Path(root)
    return sorted(p.name[:-len("d.pgm")] for p in root.glob("*d.pgm"))


def load_objects_manifest(root) -> dict:
    path = Path(root) / "objects.csv"
    mapping = {}
    if not path.exists():
        return mapping
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.lower().startswith("scene_id"):
            continue
        scene, obj = [x.strip() for x in line.split(",")[:2]]
        mapping[scene] = obj
    return mapping


def load_scene(root, scene_id: str, objects: dict | None = None):
    root = Path(root)
    depth = read_depth_pgm(root / f"{scene_id}d.pgm")
    skipped = 0
    rects = {}
    for kind in ("cpos", "cneg"):
        path = root / f"{scene_id}{kind}.txt"
        if path.exists():
            rs, sk = parse_rect_file(path.read_text(), return_skipped=True)
            skipped += sk
        else:
            rs = []
        rects[kind] = rs
    obj = (objects or {}).get(scene_id, scene_id)
    rec = SceneRecord(id=scene_id, object_id=obj, depth=depth,
                      pos_rects=rects["cpos"], neg_rects=rects["cneg"])
    return rec, skipped


def load_dataset(root) -> tuple[list[SceneRecord], IngestReport]:
    """Load every scene under root and report exact dataset counts."""
    ids = scene_ids(root)
    if not ids:
        raise FileNotFoundError(f"no *d.pgm scenes under {root}")
    objects = load_objects_manifest(root)
    records = []
    skipped = 0
    for sid in ids:
        rec, sk = load_scene(root, sid, objects)
        records.append(rec)
        skipped += sk
    report = IngestReport(
        n_scenes=len(records),
        n_pos=sum(len(r.pos_rects) for r in records),
        n_neg=sum(len(r.neg_rects) for r in records),
        n_skipped_groups=skipped,
    )
    return records, report


def write_scene(root, rec: SceneRecord, scale_mm: float = 1.0):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_depth_pgm(root / f"{rec.id}d.pgm", rec.depth, scale_mm=scale_mm)
    from .grasp_geometry import rects_to_text
    (root / f"{rec.id}cpos.txt").write_text(rects_to_text(rec.pos_rects))
    (root / f"{rec.id}cneg.txt").write_text(rects_to_text(rec.neg_rects))
