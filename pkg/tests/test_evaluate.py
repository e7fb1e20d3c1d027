import numpy as np
import pytest

from armkit.cornell_data import IW, OW, load_dataset
from armkit.evaluate import cross_validate, detect_on_record, evaluate_records
from armkit.grasp_cnn import heuristic_predictor
from armkit.grasp_geometry import grasp_success
from armkit.synthetic import make_scene, write_synthetic_dataset


@pytest.fixture(scope="module")
def fixture_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds") / "fixture"
    write_synthetic_dataset(root, n_scenes=8, seed=13)
    return root


class TestDetectOnRecord:
    def test_heuristic_finds_box_grasp(self):
        rng = np.random.default_rng(3)
        rec = make_scene("s0", "o0", rng, invalid_fraction=0.01)
        rect = detect_on_record(rec, heuristic_predictor(), out_size=200)
        assert rect is not None
        assert grasp_success(rect, rec.pos_rects)


class TestEvaluateRecords:
    def test_counts_scored_records(self, fixture_root):
        records, _ = load_dataset(fixture_root)
        n_success, n_scored = evaluate_records(records, heuristic_predictor(),
                                               out_size=200)
        assert n_scored == len(records)
        assert 0 <= n_success <= n_scored
        # the heuristic is supposed to be a usable baseline on easy scenes
        assert n_success >= n_scored // 2


class TestCrossValidate:
    def test_iw_report_shape(self, fixture_root):
        records, _ = load_dataset(fixture_root)
        report = cross_validate(records, heuristic_predictor(), IW,
                                folds=4, rng_seed=0, out_size=200)
        assert report.mode == IW
        assert len(report.folds) == 4
        assert report.n_records == len(records)
        assert "accuracy" in report.summary()

    def test_ow_folds_never_share_objects(self, fixture_root):
        records, _ = load_dataset(fixture_root)
        report = cross_validate(records, heuristic_predictor(), OW,
                                folds=3, rng_seed=1, out_size=200)
        assert report.n_records == len(records)
