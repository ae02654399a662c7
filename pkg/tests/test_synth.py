import json

import numpy as np
import pytest

from artdiff.errors import GenerationFailedError, InvalidDatasetError, InvalidParameterError
from artdiff.kinematics import recover_articulated_pose
from artdiff.synth import (
    CATEGORIES,
    N_POINTS,
    TEMPLATES,
    build_dataset,
    cull_half_space,
    get_template,
    load_dataset,
    sample_box_surface,
    sample_instance,
    save_dataset,
    write_gt_csv,
)


class TestSurface:
    def test_points_on_box_faces(self, rng):
        c, s = np.array([0.1, 0.2, 0.3]), np.array([0.4, 0.2, 0.1])
        pts = sample_box_surface(c, s, 5000, rng)
        local = np.abs(pts - c) / (s / 2)
        assert np.all(local <= 1 + 1e-12)
        assert np.allclose(local.max(axis=1), 1.0)


class TestCulling:
    def test_ratio_in_interval(self, rng):
        pts = rng.normal(size=(2048, 3))
        for target in [(0.0, 0.4), (0.4, 0.8), (0.8, 1.0), (0.3, 0.31)]:
            keep, ratio = cull_half_space(pts, target, rng)
            assert target[0] < ratio <= target[1]
            assert keep.shape[0] == round(ratio * 2048)
            assert np.all(np.diff(keep) > 0)

    def test_no_cull_for_full_visibility(self, rng):
        keep, ratio = cull_half_space(np.zeros((10, 3)), (0.99, 1.0), rng)
        assert ratio == 1.0 and keep.shape[0] == 10

    def test_unreachable_target(self, rng):
        with pytest.raises(GenerationFailedError):
            cull_half_space(np.zeros((4, 3)), (0.3, 0.4), rng)

    def test_bad_target(self, rng):
        with pytest.raises(InvalidParameterError):
            cull_half_space(np.zeros((4, 3)), (0.5, 0.5), rng)


class TestInstances:
    @pytest.mark.parametrize("name", sorted(TEMPLATES))
    def test_instance_shape(self, name, rng):
        inst = sample_instance(TEMPLATES[name], rng, (0.4, 0.8))
        assert inst.points.shape == (N_POINTS, 3)
        assert inst.labels.shape == (N_POINTS,)
        assert 0.4 < inst.visibility <= 0.8
        assert len(inst.gt_pose) == TEMPLATES[name].tree.part_count
        for j, s in zip(inst.gt_tree.joints, inst.gt_joint_states):
            assert j.limits[0] <= s <= j.limits[1]

    def test_points_rounded(self, rng):
        inst = sample_instance(TEMPLATES["laptop"], rng)
        assert np.array_equal(inst.points, np.round(inst.points, 6))

    def test_unknown_template(self):
        with pytest.raises(InvalidParameterError):
            get_template("toaster")

    def test_categories(self):
        assert set(CATEGORIES) <= set(TEMPLATES)
        assert len(CATEGORIES) == 5


class TestDataset:
    def test_round_robin_buckets(self):
        data = build_dataset("scissors", 9, seed=2)
        assert [d.bucket for d in data] == [0, 1, 2] * 3
        assert all(d.visibility <= 0.4 for d in data[::3])

    def test_deterministic(self):
        a = build_dataset("eyeglasses", 4, seed=11)
        b = build_dataset("eyeglasses", 4, seed=11)
        for x, y in zip(a, b):
            assert np.array_equal(x.points, y.points)
            assert x.gt_joint_states == y.gt_joint_states

    def test_prefix_stable(self):
        short = build_dataset("laptop", 3, seed=4)
        long = build_dataset("laptop", 6, seed=4)
        for x, y in zip(short, long):
            assert np.array_equal(x.points, y.points)

    def test_jsonl_round_trip(self, tmp_path):
        data = build_dataset("robot_arm", 3, seed=5)
        path = save_dataset(data, tmp_path / "d.jsonl")
        lines = path.read_text().splitlines()
        assert len(lines) == 3
        rec = json.loads(lines[0])
        for key in ("template_id", "seed", "visibility", "parent_pose", "joints", "points", "labels"):
            assert key in rec
        back = load_dataset(path)
        for x, y in zip(data, back):
            assert np.array_equal(x.points, y.points)
            assert x.gt_tree.is_chain and y.gt_tree.is_chain
            for p, q in zip(x.gt_pose, y.gt_pose):
                assert np.allclose(p.matrix, q.matrix, atol=1e-12)

    def test_corrupt_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"template_id": "x"}\n')
        with pytest.raises(InvalidDatasetError):
            load_dataset(path)

    def test_gt_csv(self, tmp_path):
        data = build_dataset("drawer", 2, seed=1)
        text = write_gt_csv(data, tmp_path / "gt.csv").read_text()
        rows = text.strip().splitlines()
        assert len(rows) == 1 + 2 * 4
        assert rows[0].startswith("instance,template,part,visibility,R00")

    def test_bad_count(self):
        with pytest.raises(InvalidParameterError):
            build_dataset("drawer", 0)
