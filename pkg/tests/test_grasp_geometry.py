import math

import numpy as np
import pytest

from armkit.geometry import Transform, quat_from_axis_angle
from armkit.grasp_geometry import (
    CameraModel,
    GraspMap,
    GraspPixel,
    GraspRectangle,
    GraspWorld,
    angle_difference,
    camera_to_robot,
    decode_angle,
    decode_grasp_map,
    encode_angle,
    encode_ground_truth,
    fold_angle,
    grasp_success,
    image_to_camera,
    iou,
    rect_from_pixel,
    rects_from_vertices,
    rects_to_text,
)

from .oracles import rect_raster_iou


def random_rect(rng, span=200.0, center=None):
    if center is None:
        center = rng.uniform(60, span - 60, size=2)
    return GraspRectangle(
        center=(float(center[0]), float(center[1])),
        angle=float(rng.uniform(-math.pi / 2, math.pi / 2)),
        width=float(rng.uniform(10, 80)),
        height=float(rng.uniform(5, 60)),
    )


class TestAngleCoding:
    def test_zero(self):
        assert encode_angle(0.0) == (1.0, 0.0)

    def test_quarter_pi(self):
        c, s = encode_angle(math.pi / 4)
        assert c == pytest.approx(0.0, abs=1e-15)
        assert s == pytest.approx(1.0)

    def test_minus_third_pi(self):
        c, s = encode_angle(-math.pi / 3)
        assert c == pytest.approx(-0.5, abs=1e-9)
        assert s == pytest.approx(-0.8660254037844386, abs=1e-9)

    def test_round_trip_grid(self):
        for phi in np.linspace(-math.pi / 2, math.pi / 2, 181)[1:-1]:
            c, s = encode_angle(float(phi))
            assert decode_angle(c, s) == pytest.approx(float(phi), abs=1e-9)

    def test_boundary_convention(self):
        assert decode_angle(-1.0, 0.0) == pytest.approx(math.pi / 2)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            decode_angle(0.0, 0.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            encode_angle(float("nan"))

    def test_fold_angle(self):
        assert fold_angle(math.pi / 2 + 0.1) == pytest.approx(-math.pi / 2 + 0.1)
        assert fold_angle(-2.0) == pytest.approx(-2.0 + math.pi)
        assert fold_angle(0.3) == pytest.approx(0.3)


class TestDecodeGraspMap:
    def _empty(self, h=300, w=300):
        z = np.zeros((h, w))
        return z.copy(), z.copy(), z.copy(), z.copy()

    def test_single_peak(self):
        q, c, s, w = self._empty()
        q[150, 200] = 0.9
        c[150, 200], s[150, 200] = encode_angle(0.25)
        w[150, 200] = 0.4
        g = decode_grasp_map(GraspMap(q, c, s, w), k=3)
        assert len(g) == 1
        assert (g[0].u, g[0].v) == (200.0, 150.0)
        assert g[0].q == pytest.approx(0.9)
        assert g[0].phi == pytest.approx(0.25)
        assert g[0].omega == pytest.approx(0.4 * 150.0)

    def test_two_separated_peaks_descending(self):
        q, c, s, w = self._empty()
        q[50, 50] = 0.7
        q[200, 200] = 0.9
        g = decode_grasp_map(GraspMap(q, c, s, w), k=2)
        assert len(g) == 2
        assert g[0].q == pytest.approx(0.9)
        assert g[1].q == pytest.approx(0.7)

    def test_close_peak_suppressed(self):
        q, c, s, w = self._empty()
        q[100, 100] = 0.9
        q[100, 103] = 0.8
        g = decode_grasp_map(GraspMap(q, c, s, w), k=2, min_separation=10)
        assert len(g) == 1
        assert (g[0].u, g[0].v) == (100.0, 100.0)

    def test_all_zero_returns_empty(self):
        q, c, s, w = self._empty()
        assert decode_grasp_map(GraspMap(q, c, s, w), k=5) == []

    def test_k_validated(self):
        q, c, s, w = self._empty(10, 10)
        with pytest.raises(ValueError):
            decode_grasp_map(GraspMap(q, c, s, w), k=0)


class TestRectFromPixel:
    def test_axis_aligned(self):
        r = rect_from_pixel(GraspPixel(u=100, v=100, phi=0.0, omega=60, q=1.0),
                            height_ratio=0.5)
        assert r.center == (100, 100)
        assert r.angle == 0.0
        assert (r.width, r.height) == (60, 30)
        np.testing.assert_allclose(
            r.corners(), [[70, 85], [130, 85], [130, 115], [70, 115]], atol=1e-12)

    def test_rotated_90_swaps_extents(self):
        a = rect_from_pixel(GraspPixel(u=50, v=50, phi=0.0, omega=40, q=1.0), 0.5)
        b = rect_from_pixel(GraspPixel(u=50, v=50, phi=math.pi / 2, omega=40, q=1.0), 0.5)
        ca = np.sort(a.corners(), axis=0)
        cb = np.sort(b.corners(), axis=0)
        np.testing.assert_allclose(ca[:, 0], cb[:, 1], atol=1e-9)
        np.testing.assert_allclose(ca[:, 1], cb[:, 0], atol=1e-9)

    def test_unit_ratio_square(self):
        r = rect_from_pixel(GraspPixel(u=0, v=0, phi=0.3, omega=25, q=0.5), 1.0)
        assert r.width == r.height == 25

    def test_zero_width_rejected(self):
        with pytest.raises(ValueError):
            rect_from_pixel(GraspPixel(u=0, v=0, phi=0, omega=0, q=0.5))


class TestIou:
    def test_identity_exact(self, rng):
        for _ in range(50):
            r = random_rect(rng)
            assert iou(r, r) == 1.0

    def test_disjoint_zero(self):
        a = GraspRectangle((0, 0), 0.0, 10, 5)
        b = GraspRectangle((100, 100), 0.3, 10, 5)
        assert iou(a, b) == 0.0

    def test_analytic_third(self):
        a = GraspRectangle((0, 0), 0.0, 20, 10)
        b = GraspRectangle((10, 0), 0.0, 20, 10)
        assert iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_matches_raster_oracle(self, rng):
        for _ in range(300):
            c = rng.uniform(80, 120, size=2)
            a = random_rect(rng, center=c + rng.uniform(-30, 30, size=2))
            b = random_rect(rng, center=c + rng.uniform(-30, 30, size=2))
            exact = iou(a, b)
            raster = rect_raster_iou(a, b, resolution=0.25)
            assert abs(exact - raster) < 0.02

    def test_symmetric_exactly(self, rng):
        for _ in range(1000):
            c = rng.uniform(50, 150, size=2)
            a = random_rect(rng, center=c + rng.uniform(-20, 20, size=2))
            b = random_rect(rng, center=c + rng.uniform(-20, 20, size=2))
            x = iou(a, b)
            assert x == iou(b, a)
            assert 0.0 <= x <= 1.0


class TestGraspSuccess:
    def test_identical_true(self, rng):
        r = random_rect(rng)
        assert grasp_success(r, [r])

    def test_rotation_beyond_tolerance_fails(self):
        gt = GraspRectangle((100, 100), 0.0, 60, 55)
        pred = GraspRectangle((100, 100), math.radians(31), 60, 55)
        # IoU is still high for a near-square pair, the angle rule rejects
        assert iou(pred, gt) > 0.25
        assert not grasp_success(pred, [gt])

    def test_rotation_within_tolerance_passes(self):
        gt = GraspRectangle((100, 100), 0.0, 60, 55)
        pred = GraspRectangle((100, 100), math.radians(29), 60, 55)
        assert iou(pred, gt) > 0.25
        assert grasp_success(pred, [gt])

    def test_low_iou_fails(self):
        gt = GraspRectangle((100, 100), 0.0, 20, 10)
        pred = GraspRectangle((114, 100), 0.0, 20, 10)   # IoU = 6/34 < 0.25
        assert iou(pred, gt) < 0.25
        assert not grasp_success(pred, [gt])

    def test_antipodal_symmetry(self, rng):
        for _ in range(100):
            gt = random_rect(rng)
            pred = random_rect(rng, center=np.array(gt.center) + rng.uniform(-5, 5, 2))
            flipped = GraspRectangle(pred.center, fold_angle(pred.angle + math.pi),
                                     pred.width, pred.height)
            assert grasp_success(pred, [gt]) == grasp_success(flipped, [gt])

    def test_empty_gts_rejected(self, rng):
        with pytest.raises(ValueError):
            grasp_success(random_rect(rng), [])


class TestAngleDifference:
    def test_folding(self):
        assert angle_difference(0.0, math.pi) == pytest.approx(0.0)
        assert angle_difference(-math.pi / 2, math.pi / 2) == pytest.approx(0.0)
        assert angle_difference(0.0, math.pi / 2) == pytest.approx(math.pi / 2)


class TestImageToCamera:
    CAM = CameraModel(fx=400, fy=400, cx=200, cy=200)

    def test_principal_point(self):
        g = image_to_camera(GraspPixel(u=200, v=200, phi=0.1, omega=10, q=0.5),
                            0.5, self.CAM)
        np.testing.assert_allclose(g.p, [0, 0, 0.5], atol=1e-15)

    def test_pinhole_arithmetic(self):
        g = image_to_camera(GraspPixel(u=600, v=200, phi=0.0, omega=10, q=0.5),
                            1.0, self.CAM)
        np.testing.assert_allclose(g.p, [1.0, 0.0, 1.0], atol=1e-15)

    def test_width_similar_triangles(self):
        g = image_to_camera(GraspPixel(u=200, v=200, phi=0.0, omega=400, q=0.5),
                            1.0, self.CAM)
        assert g.w == pytest.approx(1.0)

    def test_nonpositive_depth(self):
        with pytest.raises(ValueError):
            image_to_camera(GraspPixel(u=0, v=0, phi=0, omega=1, q=0.5), 0.0, self.CAM)


class TestCameraToRobot:
    def test_identity(self):
        cam = CameraModel(400, 400, 200, 200)
        g = GraspWorld(p=[0.1, 0.2, 0.3], phi=0.4, w=0.05, q=0.9)
        out = camera_to_robot(g, cam)
        np.testing.assert_allclose(out.p, g.p)
        assert out.phi == pytest.approx(0.4)
        assert (out.w, out.q) == (g.w, g.q)

    def test_pure_translation(self):
        cam = CameraModel(400, 400, 200, 200, extrinsic=Transform([0, 0, 1.0]))
        g = GraspWorld(p=[0.1, 0.2, 0.3], phi=0.4, w=0.05, q=0.9)
        out = camera_to_robot(g, cam)
        np.testing.assert_allclose(out.p, [0.1, 0.2, 1.3])
        assert out.phi == pytest.approx(0.4)

    def test_yaw_rotation(self):
        ext = Transform([0, 0, 0], quat_from_axis_angle([0, 0, 1], math.pi / 2))
        cam = CameraModel(400, 400, 200, 200, extrinsic=ext)
        g = GraspWorld(p=[1.0, 0.0, 0.0], phi=0.3, w=0.05, q=0.9)
        out = camera_to_robot(g, cam)
        np.testing.assert_allclose(out.p, [0, 1, 0], atol=1e-12)
        assert out.phi == pytest.approx(fold_angle(0.3 + math.pi / 2))


class TestEncodeGroundTruth:
    def test_empty_gives_zero_map(self):
        g = encode_ground_truth([], 64, 64)
        assert not g.q_img.any()

    def test_center_third_matches_point_oracle(self, rng):
        rect = GraspRectangle((100.0, 80.0), 0.0, 60.0, 30.0)
        g = encode_ground_truth([rect], 160, 200)
        # per-pixel oracle: centered coordinates inside (width x height/3)
        for v in range(160):
            for u in range(200):
                du, dv = u - 100.0, v - 80.0
                inside = abs(du) <= 30.0 and abs(dv) <= 5.0
                assert bool(g.q_img[v, u] == 1.0) == inside, (u, v)

    def test_round_trip_success(self, rng):
        for _ in range(25):
            rect = GraspRectangle(
                center=(float(rng.uniform(100, 200)), float(rng.uniform(100, 200))),
                angle=float(rng.uniform(-math.pi / 2, math.pi / 2)),
                width=float(rng.uniform(40, 110)),
                height=float(rng.uniform(20, 80)),
            )
            g = encode_ground_truth([rect], 300, 300)
            decoded = decode_grasp_map(g, k=1)
            assert decoded
            pred = rect_from_pixel(decoded[0], height_ratio=0.5)
            assert grasp_success(pred, [rect])

    def test_rotated_sources_shift_decoded_angle(self, rng):
        base = GraspRectangle((150.0, 150.0), 0.1, 70.0, 40.0)
        theta = 0.6
        rot = GraspRectangle((150.0, 150.0), fold_angle(0.1 + theta), 70.0, 40.0)
        g0 = decode_grasp_map(encode_ground_truth([base], 300, 300), k=1)[0]
        g1 = decode_grasp_map(encode_ground_truth([rot], 300, 300), k=1)[0]
        d = angle_difference(g1.phi, g0.phi + theta)
        assert math.degrees(d) < 3.0

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            encode_ground_truth([GraspRectangle((5, 5), 0.0, 60, 30)], 100, 100)


class TestRectText:
    def test_round_trip(self, rng):
        rects = [random_rect(rng) for _ in range(5)]
        text = rects_to_text(rects)
        groups = [np.array([[float(x) for x in line.split()]
                            for line in text.strip().split("\n")[i * 4:i * 4 + 4]])
                  for i in range(5)]
        back = rects_from_vertices(groups)
        for a, b in zip(rects, back):
            assert a.center[0] == pytest.approx(b.center[0], abs=1e-3)
            assert a.center[1] == pytest.approx(b.center[1], abs=1e-3)
            assert angle_difference(a.angle, b.angle) < 1e-3
            assert a.width == pytest.approx(b.width, abs=1e-2)
            assert a.height == pytest.approx(b.height, abs=1e-2)

    def test_worked_example(self):
        verts = np.array([[70, 85], [130, 85], [130, 115], [70, 115]], dtype=float)
        (r,) = rects_from_vertices([verts])
        assert r.center == (100.0, 100.0)
        assert r.angle == pytest.approx(0.0)
        assert r.width == pytest.approx(60.0)
        assert r.height == pytest.approx(30.0)
