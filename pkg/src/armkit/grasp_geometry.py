"""Planar antipodal grasp representation and the rectangle success metric.

A grasp in image space is a center pixel, an opening angle phi in
[-pi/2, pi/2], a jaw opening omega in pixels and a quality score q in
[0, 1]. Maps carry the angle as cos(2 phi) / sin(2 phi) planes so the
antipodal symmetry (phi and phi + pi describe the same grasp) stays
continuous. Rectangle geometry conventions:

  - pixel coordinates are (u, v) = (column, row); angles measured from +u
    toward +v
  - a rectangle's width is the jaw opening along the grasp axis, height is
    the jaw extent perpendicular to it

All operations are pure; maps are value types safe to share read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Transform

# Normalized width-plane values in [0, 1] map to [0, width_scale] pixels.
# The regression targets stay bounded; the scale is a design choice.
WIDTH_SCALE_PX = 150.0

# Height of a rectangle built from a decoded grasp, as a fraction of its
# width. Predicted jaw extent is not part of the map representation, so
# this default directly affects IoU scores.
DEFAULT_HEIGHT_RATIO = 0.5

ANGLE_TOL_DEG = 30.0
IOU_THRESHOLD = 0.25


@dataclass(frozen=True)
class GraspPixel:
    """Image-space grasp: center (u, v), angle, opening in pixels, quality."""

    u: float
    v: float
    phi: float
    omega: float
    q: float

    def __post_init__(self):
        if not -math.pi / 2 - 1e-9 <= self.phi <= math.pi / 2 + 1e-9:
            raise ValueError("phi outside [-pi/2, pi/2]")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q outside [0, 1]")


@dataclass(frozen=True)
class GraspWorld:
    """Metric grasp: position (m), angle about z, opening width (m), quality."""

    p: np.ndarray
    phi: float
    w: float
    q: float

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(3))
        if self.w < 0:
            raise ValueError("width must be >= 0")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q outside [0, 1]")


@dataclass(frozen=True)
class GraspRectangle:
    """Oriented rectangle: center (u, v), angle, width along the grasp axis,
    height perpendicular to it."""

    center: tuple[float, float]
    angle: float
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("rectangle width and height must be positive")

    def corners(self) -> np.ndarray:
        """4x2 vertex array, ordered so the first edge runs along the grasp axis."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        ax = np.array([c, s])
        ay = np.array([-s, c])
        hw = 0.5 * self.width
        hh = 0.5 * self.height
        ctr = np.asarray(self.center, dtype=float)
        return np.array([
            ctr - hw * ax - hh * ay,
            ctr + hw * ax - hh * ay,
            ctr + hw * ax + hh * ay,
            ctr - hw * ax + hh * ay,
        ])

    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus the camera-to-robot extrinsic transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    extrinsic: Transform = field(default_factory=Transform.identity)

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class GraspMap:
    """Per-pixel grasp planes: quality, cos(2 phi), sin(2 phi), width.

    q_img is clamped to [0, 1] on construction; all planes share one shape.
    """

    q_img: np.ndarray
    cos2phi_img: np.ndarray
    sin2phi_img: np.ndarray
    width_img: np.ndarray

    def __post_init__(self):
        q = np.clip(np.asarray(self.q_img, dtype=float), 0.0, 1.0)
        c = np.asarray(self.cos2phi_img, dtype=float)
        s = np.asarray(self.sin2phi_img, dtype=float)
        w = np.asarray(self.width_img, dtype=float)
        if not (q.shape == c.shape == s.shape == w.shape) or q.ndim != 2:
            raise ValueError("all four planes must share one 2-D shape")
        object.__setattr__(self, "q_img", q)
        object.__setattr__(self, "cos2phi_img", c)
        object.__setattr__(self, "sin2phi_img", s)
        object.__setattr__(self, "width_img", w)

    @property
    def shape(self) -> tuple[int, int]:
        return self.q_img.shape


def encode_angle(phi: float) -> tuple[float, float]:
    """Angle to its double-angle encoding (cos 2 phi, sin 2 phi)."""
    if not math.isfinite(phi):
        raise ValueError("phi must be finite")
    return math.cos(2.0 * phi), math.sin(2.0 * phi)


def decode_angle(c: float, s: float) -> float:
    """Recover phi in [-pi/2, pi/2] from the double-angle encoding."""
    if c == 0.0 and s == 0.0:
        raise ValueError("angle undefined for (0, 0)")
    return math.atan2(s, c) / 2.0


def fold_angle(phi: float) -> float:
    """Wrap any angle into [-pi/2, pi/2] modulo pi (antipodal symmetry)."""
    phi = math.fmod(phi + math.pi / 2, math.pi)
    if phi < 0:
        phi += math.pi
    return phi - math.pi / 2


def angle_difference(a: float, b: float) -> float:
    """Angle between two grasp axes, folded into [0, pi/2]."""
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def decode_grasp_map(g: GraspMap, k: int = 1, min_separation: float = 10.0,
                     width_scale: float = WIDTH_SCALE_PX) -> list[GraspPixel]:
    """Top-k grasps from a map by greedy peak picking with suppression.

    Peaks are taken in descending quality; any pixel within min_separation
    of an already selected peak is suppressed. A plateau of equal quality
    is reported at the centroid of its connected component, which makes
    decoding stable on painted ground-truth maps. Returns an empty list
    when the whole quality plane is zero.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = g.q_img
    h, w = q.shape
    alive = np.ones_like(q, dtype=bool)
    out: list[GraspPixel] = []
    vv, uu = np.mgrid[0:h, 0:w]
    while len(out) < k:
        masked = np.where(alive, q, -1.0)
        idx = int(np.argmax(masked))
        v0, u0 = divmod(idx, w)
        peak = masked[v0, u0]
        if peak <= 0.0:
            break
        # centroid of the connected plateau at the peak value
        u_c, v_c = _plateau_centroid(q, alive, u0, v0)
        ui, vi = int(round(u_c)), int(round(v_c))
        ui = min(max(ui, 0), w - 1)
        vi = min(max(vi, 0), h - 1)
        phi = decode_angle(float(g.cos2phi_img[vi, ui]), float(g.sin2phi_img[vi, ui])) \
            if (g.cos2phi_img[vi, ui] or g.sin2phi_img[vi, ui]) else 0.0
        omega = float(np.clip(g.width_img[vi, ui], 0.0, 1.0)) * width_scale
        out.append(GraspPixel(u=float(ui), v=float(vi), phi=phi, omega=omega,
                              q=float(q[vi, ui])))
        dist2 = (uu - ui) ** 2 + (vv - vi) ** 2
        alive &= dist2 >= min_separation ** 2
        if not alive.any():
            break
    return out


def _plateau_centroid(q, alive, u0, v0):
    """Centroid of the 8-connected equal-value component containing (u0, v0)."""
    h, w = q.shape
    value = q[v0, u0]
    seen = {(v0, u0)}
    stack = [(v0, u0)]
    su = sv = cnt = 0
    while stack:
        v, u = stack.pop()
        su += u
        sv += v
        cnt += 1
        for dv in (-1, 0, 1):
            for du in (-1, 0, 1):
                nv, nu = v + dv, u + du
                if 0 <= nv < h and 0 <= nu < w and (nv, nu) not in seen \
                        and alive[nv, nu] and q[nv, nu] == value:
                    seen.add((nv, nu))
                    stack.append((nv, nu))
    return su / cnt, sv / cnt


def rect_from_pixel(gp: GraspPixel, height_ratio: float = DEFAULT_HEIGHT_RATIO) -> GraspRectangle:
    """Rectangle form of a decoded grasp: width is the opening, height a
    fixed fraction of it."""
    if gp.omega <= 0:
        raise ValueError("grasp has zero width")
    if height_ratio <= 0:
        raise ValueError("height_ratio must be positive")
    return GraspRectangle(center=(gp.u, gp.v), angle=gp.phi,
                          width=gp.omega, height=gp.omega * height_ratio)


# ---------------------------------------------------------------------------
# exact rotated-rectangle IoU via convex polygon clipping

def _clip_polygon(poly: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman step: keep the left side of directed edge a->b.

    Rectangle corners are ordered counterclockwise in (u, v), so the
    interior lies to the left of every edge.
    """
    edge = b - a
    out = []
    n = len(poly)
    for i in range(n):
        p = poly[i]
        r = poly[(i + 1) % n]
        dp = edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])
        dr = edge[0] * (r[1] - a[1]) - edge[1] * (r[0] - a[0])
        inside_p = dp >= 0.0
        inside_r = dr >= 0.0
        if inside_p:
            out.append(p)
        if inside_p != inside_r:
            t = dp / (dp - dr)
            out.append(p + t * (r - p))
    return np.array(out) if out else np.empty((0, 2))


def _shoelace(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def intersection_area(a: GraspRectangle, b: GraspRectangle) -> float:
    """Exact area of the convex intersection of two rectangles."""
    poly = a.corners()
    cb = b.corners()
    for i in range(4):
        poly = _clip_polygon(poly, cb[i], cb[(i + 1) % 4])
        if len(poly) == 0:
            return 0.0
    return _shoelace(poly)


def iou(a: GraspRectangle, b: GraspRectangle) -> float:
    """Intersection over union in [0, 1]; exact, resolution independent.

    Operands are put in a canonical order first so iou(a, b) and
    iou(b, a) are bit-identical.
    """
    if a == b:
        return 1.0
    ka = (a.center, a.angle, a.width, a.height)
    kb = (b.center, b.angle, b.width, b.height)
    if kb < ka:
        a, b = b, a
    inter = intersection_area(a, b)
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def grasp_success(pred: GraspRectangle, gts: list[GraspRectangle],
                  angle_tol_deg: float = ANGLE_TOL_DEG,
                  iou_threshold: float = IOU_THRESHOLD) -> bool:
    """Rectangle metric: success iff some ground-truth rectangle is within
    the angle tolerance (strictly less) and above the IoU threshold
    (strictly more). Angles compare modulo pi."""
    if not gts:
        raise ValueError("ground-truth rectangle list is empty")
    tol = math.radians(angle_tol_deg)
    for gt in gts:
        if angle_difference(pred.angle, gt.angle) < tol and iou(pred, gt) > iou_threshold:
            return True
    return False


# ---------------------------------------------------------------------------
# image -> camera -> robot transforms

def image_to_camera(gp: GraspPixel, depth: float, cam: CameraModel) -> GraspWorld:
    """Back-project a pixel grasp to the camera frame via the pinhole model.

    The opening width scales by similar triangles on the x focal length.
    """
    if depth <= 0:
        raise ValueError("depth must be positive")
    x = (gp.u - cam.cx) * depth / cam.fx
    y = (gp.v - cam.cy) * depth / cam.fy
    return GraspWorld(p=np.array([x, y, depth]), phi=gp.phi,
                      w=gp.omega * depth / cam.fx, q=gp.q)


def camera_to_robot(g_cam: GraspWorld, cam: CameraModel) -> GraspWorld:
    """Move a camera-frame grasp into the robot frame via the extrinsic.

    The grasp angle follows the rotation of its in-plane axis direction.
    """
    p = cam.extrinsic.apply(g_cam.p)
    d = cam.extrinsic.rotate([math.cos(g_cam.phi), math.sin(g_cam.phi), 0.0])
    if abs(d[0]) < 1e-12 and abs(d[1]) < 1e-12:
        phi = g_cam.phi    # grasp axis maps onto z; keep the input angle
    else:
        phi = fold_angle(math.atan2(d[1], d[0]))
    return GraspWorld(p=p, phi=phi, w=g_cam.w, q=g_cam.q)


# ---------------------------------------------------------------------------
# ground-truth painting

def encode_ground_truth(rects: list[GraspRectangle], h: int, w: int,
                        width_scale: float = WIDTH_SCALE_PX) -> GraspMap:
    """Paint rectangles into a grasp map.

    Each rectangle marks its center-third region (full width, middle third
    of the height) with q = 1, its double-angle encoding and its width
    normalized by width_scale (clamped to 1). Later rectangles overwrite
    earlier ones where regions overlap.
    """
    q = np.zeros((h, w))
    c = np.zeros((h, w))
    s = np.zeros((h, w))
    wd = np.zeros((h, w))
    for rect in rects:
        corners = rect.corners()
        if (corners[:, 0].min() < 0 or corners[:, 1].min() < 0
                or corners[:, 0].max() > w - 1 or corners[:, 1].max() > h - 1):
            raise ValueError(f"rectangle {rect.center} exceeds the {w}x{h} image")
        region = GraspRectangle(center=rect.center, angle=rect.angle,
                                width=rect.width, height=rect.height / 3.0)
        mask = _rect_mask(region, h, w)
        cos2, sin2 = encode_angle(rect.angle)
        q[mask] = 1.0
        c[mask] = cos2
        s[mask] = sin2
        wd[mask] = min(rect.width / width_scale, 1.0)
    return GraspMap(q_img=q, cos2phi_img=c, sin2phi_img=s, width_img=wd)


def _rect_mask(rect: GraspRectangle, h: int, w: int) -> np.ndarray:
    """Boolean mask of pixels whose centers fall inside the rectangle."""
    corners = rect.corners()
    u0 = max(int(math.floor(corners[:, 0].min())), 0)
    u1 = min(int(math.ceil(corners[:, 0].max())), w - 1)
    v0 = max(int(math.floor(corners[:, 1].min())), 0)
    v1 = min(int(math.ceil(corners[:, 1].max())), h - 1)
    mask = np.zeros((h, w), dtype=bool)
    if u1 < u0 or v1 < v0:
        return mask
    vv, uu = np.mgrid[v0:v1 + 1, u0:u1 + 1]
    du = uu - rect.center[0]
    dv = vv - rect.center[1]
    cth, sth = math.cos(rect.angle), math.sin(rect.angle)
    x = du * cth + dv * sth
    y = -du * sth + dv * cth
    inside = (np.abs(x) <= rect.width / 2.0) & (np.abs(y) <= rect.height / 2.0)
    mask[v0:v1 + 1, u0:u1 + 1] = inside
    return mask


# ---------------------------------------------------------------------------
# rectangle text format: 4 lines per rectangle, "x y" per vertex, vertices
# ordered so the first edge runs along the grasp axis (see docs/formats.md)

def rects_to_text(rects: list[GraspRectangle]) -> str:
    lines = []
    for r in rects:
        for u, v in r.corners():
            lines.append(f"{u:.4f} {v:.4f}")
    return "\n".join(lines) + ("\n" if lines else "")


def rects_from_vertices(vertex_groups: list[np.ndarray]) -> list[GraspRectangle]:
    """Build rectangles from 4-vertex groups (first edge = grasp axis)."""
    out = []
    for g in vertex_groups:
        g = np.asarray(g, dtype=float).reshape(4, 2)
        center = g.mean(axis=0)
        e_w = g[1] - g[0]
        e_h = g[2] - g[1]
        width = float((np.linalg.norm(e_w) + np.linalg.norm(g[2] - g[3])) / 2.0)
        height = float((np.linalg.norm(e_h) + np.linalg.norm(g[0] - g[3])) / 2.0)
        angle = fold_angle(math.atan2(e_w[1], e_w[0]))
        out.append(GraspRectangle(center=(float(center[0]), float(center[1])),
                                  angle=angle, width=width, height=height))
    return out
