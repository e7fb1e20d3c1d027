import math

import numpy as np
import pytest

from armkit.grasp_cnn import (
    HEAD_NAMES,
    HeuristicPredictor,
    NetworkSpec,
    ShapeError,
    WeightBundle,
    build_network,
    conv2d,
    conv_transpose2d,
    default_network_spec,
    heuristic_predictor,
    random_weights,
    residual_block,
    spec_shape_chain,
    weight_shapes,
)
from armkit.grasp_geometry import angle_difference, decode_grasp_map

from .oracles import conv2d_naive, conv_transpose2d_naive


class TestConv2d:
    def test_identity_kernel(self, rng):
        x = rng.normal(size=(3, 8, 8))
        w = np.zeros((3, 3, 1, 1))
        for i in range(3):
            w[i, i, 0, 0] = 1.0
        out = conv2d(x, w, np.zeros(3), stride=1, padding=0)
        np.testing.assert_allclose(out, x, atol=1e-6)

    def test_matches_naive_oracle(self, rng):
        for _ in range(50):
            cin = int(rng.integers(1, 4))
            cout = int(rng.integers(1, 5))
            k = int(rng.integers(1, 5))
            stride = int(rng.integers(1, 3))
            padding = int(rng.integers(0, 3))
            size = int(rng.integers(k, k + 7))
            x = rng.normal(size=(cin, size, size))
            w = rng.normal(size=(cout, cin, k, k))
            b = rng.normal(size=cout)
            got = conv2d(x, w, b, stride=stride, padding=padding)
            want = conv2d_naive(x, w, b, stride=stride, padding=padding)
            assert got.shape == want.shape
            assert np.max(np.abs(got - want)) < 1e-5

    def test_stride2_dimension_formula(self, rng):
        x = rng.normal(size=(1, 400, 400)).astype(np.float32)
        w = rng.normal(size=(8, 1, 4, 4)).astype(np.float32)
        out = conv2d(x, w, np.zeros(8, dtype=np.float32), stride=2, padding=1)
        assert out.shape == (8, 200, 200)

    def test_channel_mismatch_rejected(self, rng):
        with pytest.raises(ShapeError):
            conv2d(rng.normal(size=(2, 5, 5)), rng.normal(size=(1, 3, 3, 3)),
                   np.zeros(1))


class TestConvTranspose2d:
    def test_matches_scatter_oracle(self, rng):
        for _ in range(50):
            cin = int(rng.integers(1, 4))
            cout = int(rng.integers(1, 4))
            k = int(rng.integers(1, 5))
            stride = int(rng.integers(1, 3))
            padding = int(rng.integers(0, min(k, 3)))
            size = int(rng.integers(2, 7))
            x = rng.normal(size=(cin, size, size))
            w = rng.normal(size=(cin, cout, k, k))
            b = rng.normal(size=cout)
            got = conv_transpose2d(x, w, b, stride=stride, padding=padding)
            want = conv_transpose2d_naive(x, w, b, stride=stride, padding=padding)
            assert got.shape == want.shape
            assert np.max(np.abs(got - want)) < 1e-5

    def test_upsample_dimension_formula(self, rng):
        x = rng.normal(size=(4, 50, 50)).astype(np.float32)
        w = rng.normal(size=(4, 2, 4, 4)).astype(np.float32)
        out = conv_transpose2d(x, w, np.zeros(2, dtype=np.float32), stride=2, padding=1)
        assert out.shape == (2, 100, 100)

    def test_identity_1x1(self, rng):
        x = rng.normal(size=(2, 6, 6))
        w = np.zeros((2, 2, 1, 1))
        w[0, 0] = w[1, 1] = 1.0
        out = conv_transpose2d(x, w, np.zeros(2), stride=1, padding=0)
        np.testing.assert_allclose(out, x, atol=1e-6)


class TestResidualBlock:
    def test_zero_weights_is_identity(self, rng):
        x = rng.normal(size=(8, 12, 12))
        z = np.zeros((8, 8, 3, 3))
        out = residual_block(x, z, np.zeros(8), z, np.zeros(8))
        np.testing.assert_array_equal(out, x)

    def test_preserves_shape(self, rng):
        x = rng.normal(size=(128, 50, 50)).astype(np.float32)
        w = rng.normal(size=(128, 128, 3, 3)).astype(np.float32) * 0.01
        out = residual_block(x, w, np.zeros(128, dtype=np.float32),
                             w, np.zeros(128, dtype=np.float32))
        assert out.shape == (128, 50, 50)

    def test_matches_composed_convs(self, rng):
        x = rng.normal(size=(4, 9, 9))
        w1 = rng.normal(size=(4, 4, 3, 3))
        b1 = rng.normal(size=4)
        w2 = rng.normal(size=(4, 4, 3, 3))
        b2 = rng.normal(size=4)
        got = residual_block(x, w1, b1, w2, b2)
        inner = np.maximum(conv2d_naive(x, w1, b1, 1, 1), 0.0)
        want = x + conv2d_naive(inner, w2, b2, 1, 1)
        assert np.max(np.abs(got - want)) < 1e-5


class TestNetworkSpec:
    def test_default_stage_sizes(self):
        chain = spec_shape_chain(default_network_spec())
        by_name = {name: (c, s) for name, c, s in chain}
        assert by_name["input"] == (1, 400)
        assert by_name["enc1"] == (16, 400)
        assert by_name["enc2"] == (32, 200)
        assert by_name["enc3"] == (64, 100)
        assert by_name["enc4"] == (128, 50)
        for i in range(1, 7):
            assert by_name[f"res{i}"] == (128, 50)
        assert by_name["dec3"] == (16, 400)
        for head in HEAD_NAMES:
            assert by_name[f"head_{head}"] == (1, 400)

    def test_residual_channel_mismatch_detected(self):
        spec = default_network_spec()
        bad_layers = list(spec.layers)
        from armkit.grasp_cnn import LayerSpec
        bad_layers[4] = LayerSpec("residual", "res1", 64)
        bad = NetworkSpec(spec.input_channels, spec.input_size, tuple(bad_layers))
        with pytest.raises(ShapeError, match="res1"):
            spec_shape_chain(bad)


@pytest.fixture(scope="module")
def small_spec():
    from armkit.grasp_cnn import LayerSpec
    layers = (
        LayerSpec("conv", "enc1", 4, kernel=9, stride=1, padding=4),
        LayerSpec("conv", "enc2", 8, kernel=4, stride=2, padding=1),
        LayerSpec("residual", "res1", 8),
        LayerSpec("transpose", "dec1", 4, kernel=4, stride=2, padding=1),
    )
    return NetworkSpec(input_channels=1, input_size=48, layers=layers)


class TestBuildNetwork:
    def test_random_bundle_predicts_four_planes(self, small_spec):
        pred = build_network(small_spec, random_weights(small_spec, rng_seed=1))
        g = pred.predict(np.zeros((1, 48, 48), dtype=np.float32))
        assert g.q_img.shape == (48, 48)
        assert g.q_img.min() >= 0.0 and g.q_img.max() <= 1.0
        assert g.width_img.min() >= 0.0 and g.width_img.max() <= 1.0

    def test_missing_tensor_names_layer(self, small_spec):
        weights = random_weights(small_spec, rng_seed=1)
        del weights.entries["enc2.bias"]
        with pytest.raises(ShapeError, match="enc2.bias"):
            build_network(small_spec, weights)

    def test_wrong_shape_names_layer(self, small_spec):
        weights = random_weights(small_spec, rng_seed=1)
        weights.entries["res1a.weight"] = np.zeros((4, 4, 3, 3), dtype=np.float32)
        with pytest.raises(ShapeError, match="res1a.weight"):
            build_network(small_spec, weights)

    def test_all_zero_weights_constant_quality(self, small_spec):
        shapes = weight_shapes(small_spec)
        entries = {n: np.zeros(s, dtype=np.float32) for n, s in shapes.items()}
        entries["head_quality.bias"] = np.full((1,), 0.37, dtype=np.float32)
        pred = build_network(small_spec, WeightBundle(entries))
        g = pred.predict(np.zeros((1, 48, 48), dtype=np.float32))
        np.testing.assert_allclose(g.q_img, 0.37, atol=1e-6)

    def test_deterministic(self, small_spec, rng):
        pred = build_network(small_spec, random_weights(small_spec, rng_seed=2))
        x = rng.normal(size=(1, 48, 48)).astype(np.float32)
        a = pred.predict(x)
        b = pred.predict(x)
        np.testing.assert_array_equal(a.q_img, b.q_img)
        np.testing.assert_array_equal(a.cos2phi_img, b.cos2phi_img)

    def test_input_shape_rejected(self, small_spec):
        pred = build_network(small_spec, random_weights(small_spec, rng_seed=1))
        with pytest.raises(ShapeError):
            pred.predict(np.zeros((1, 32, 32), dtype=np.float32))


class TestWeightBundle:
    def test_round_trip_bit_exact(self, tmp_path, small_spec):
        bundle = random_weights(small_spec, rng_seed=3)
        path = tmp_path / "weights.ggrw"
        bundle.save(path)
        back = WeightBundle.load(path)
        assert set(back.entries) == set(bundle.entries)
        for name in bundle.entries:
            np.testing.assert_array_equal(back[name], bundle[name])
        # a second save is byte-identical
        path2 = tmp_path / "again.ggrw"
        back.save(path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.ggrw"
        p.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValueError):
            WeightBundle.load(p)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            WeightBundle({"a": np.array([np.inf], dtype=np.float32)})


class TestHeuristicPredictor:
    def _block_scene(self, h=200, w=200, center=(100, 100), angle=0.0,
                     long_px=90, short_px=36):
        depth = np.full((h, w), 0.75)
        vv, uu = np.mgrid[0:h, 0:w]
        du = uu - center[0]
        dv = vv - center[1]
        c, s = math.cos(angle), math.sin(angle)
        x = du * c + dv * s
        y = -du * s + dv * c
        depth[(np.abs(x) <= long_px / 2) & (np.abs(y) <= short_px / 2)] = 0.70
        return depth - depth.mean()

    def test_flat_scene_uniform_quality(self):
        g = heuristic_predictor().predict(np.zeros((1, 64, 64)))
        assert float(g.q_img.max() - g.q_img.min()) == pytest.approx(0.0, abs=1e-12)

    def test_output_shapes_match_input(self):
        g = heuristic_predictor().predict(np.zeros((1, 120, 90)))
        assert g.q_img.shape == (120, 90)

    def test_block_grasps_cross_narrow_dimension(self):
        # box long along u: graspable across the short (v) side, phi ~ pi/2
        depth = self._block_scene(angle=0.0)
        g = heuristic_predictor().predict(depth)
        picks = decode_grasp_map(g, k=3, min_separation=12)
        assert picks
        for p in picks:
            assert abs(p.u - 100) <= 45 and abs(p.v - 100) <= 18   # on the box
            assert angle_difference(p.phi, math.pi / 2) < math.radians(15)

    def test_rotated_block_angle_follows(self):
        theta = 0.5
        depth = self._block_scene(angle=theta)
        g = heuristic_predictor().predict(depth)
        picks = decode_grasp_map(g, k=1, min_separation=12)
        assert picks
        assert angle_difference(picks[0].phi, theta + math.pi / 2) < math.radians(15)


class TestInferenceBudget:
    def test_default_forward_pass_under_budget(self):
        import time
        spec = default_network_spec()
        pred = build_network(spec, random_weights(spec, rng_seed=0))
        x = np.random.default_rng(0).normal(size=(1, 400, 400)).astype(np.float32)
        pred.predict(x)     # warm-up
        t0 = time.perf_counter()
        pred.predict(x)
        elapsed = time.perf_counter() - t0
        assert elapsed <= 2.0, f"forward pass took {elapsed:.2f}s"
