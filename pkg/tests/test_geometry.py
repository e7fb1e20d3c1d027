import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from armkit.geometry import (
    Transform,
    quat_conj,
    quat_distance,
    quat_from_axis_angle,
    quat_from_matrix,
    quat_log_vector,
    quat_mul,
    quat_normalize,
    quat_rotate,
    quat_slerp,
    quat_to_matrix,
)


def random_unit_quat(rng):
    return quat_normalize(rng.normal(size=4))


def test_quat_mul_matches_scipy(rng):
    for _ in range(200):
        a = random_unit_quat(rng)
        b = random_unit_quat(rng)
        got = quat_mul(a, b)
        ra = Rotation.from_quat([a[1], a[2], a[3], a[0]])
        rb = Rotation.from_quat([b[1], b[2], b[3], b[0]])
        x, y, z, w = (ra * rb).as_quat()
        assert quat_distance(got, [w, x, y, z]) < 1e-12


def test_quat_rotate_matches_matrix(rng):
    for _ in range(200):
        q = random_unit_quat(rng)
        v = rng.normal(size=3)
        np.testing.assert_allclose(quat_rotate(q, v), quat_to_matrix(q) @ v,
                                   atol=1e-12)


def test_matrix_round_trip(rng):
    for _ in range(500):
        q = random_unit_quat(rng)
        assert quat_distance(q, quat_from_matrix(quat_to_matrix(q))) < 1e-9


def test_axis_angle_log_round_trip(rng):
    for _ in range(200):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(-np.pi + 1e-6, np.pi - 1e-6)
        vec = quat_log_vector(quat_from_axis_angle(axis, angle))
        np.testing.assert_allclose(vec, axis * angle, atol=1e-9)


def test_log_is_shortest_arc():
    q = quat_from_axis_angle([0, 0, 1], 3 * np.pi / 2)  # same as -pi/2
    np.testing.assert_allclose(quat_log_vector(q), [0, 0, -np.pi / 2], atol=1e-12)


def test_normalize_rejects_zero():
    with pytest.raises(ValueError):
        quat_normalize([0.0, 0.0, 0.0, 0.0])


def test_transform_compose_inverse(rng):
    for _ in range(100):
        a = Transform(rng.normal(size=3), random_unit_quat(rng))
        b = Transform(rng.normal(size=3), random_unit_quat(rng))
        p = rng.normal(size=3)
        np.testing.assert_allclose(a.compose(b).apply(p), a.apply(b.apply(p)),
                                   atol=1e-12)
        roundtrip = a.compose(a.inverse())
        np.testing.assert_allclose(roundtrip.apply(p), p, atol=1e-12)


def test_transform_matrix_agrees(rng):
    a = Transform(rng.normal(size=3), random_unit_quat(rng))
    p = rng.normal(size=3)
    hp = a.to_matrix() @ np.append(p, 1.0)
    np.testing.assert_allclose(a.apply(p), hp[:3], atol=1e-12)


def test_slerp_endpoints_and_midpoint():
    a = np.array([1.0, 0.0, 0.0, 0.0])
    b = quat_from_axis_angle([0, 0, 1], np.pi / 2)
    assert quat_distance(quat_slerp(a, b, 0.0), a) < 1e-12
    assert quat_distance(quat_slerp(a, b, 1.0), b) < 1e-12
    mid = quat_slerp(a, b, 0.5)
    assert quat_distance(mid, quat_from_axis_angle([0, 0, 1], np.pi / 4)) < 1e-12
