import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artdiff.errors import DegenerateAxisError, InvalidComparisonError, InvalidTreeError, JointLimitError
from artdiff.evaluation import rotation_error
from artdiff.geometry import PoseSE3, axis_angle, random_rotation, rot_x, rot_z
from artdiff.kinematics import (
    JointRecord,
    PartTree,
    axis_metrics,
    child_pose_fk,
    joint_frame,
    orthogonalize,
    recover_articulated_pose,
)
from artdiff.synth import TEMPLATES

from conftest import quat_angle_deg, quat_from_matrix, quaternion_fk

unit_vectors = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1)


class TestJointRecord:
    def test_revolute_needs_pivot(self):
        with pytest.raises(InvalidTreeError):
            JointRecord("revolute", (1, 0, 0), 1, (0, 90))

    def test_axis_must_be_unit(self):
        with pytest.raises(InvalidTreeError):
            JointRecord("prismatic", (2, 0, 0), 1, (0, 1))

    def test_limits(self):
        with pytest.raises(InvalidTreeError):
            JointRecord.revolute((1, 0, 0), (0, 0, 0), 1, (10, 5))
        with pytest.raises(InvalidTreeError):
            JointRecord.revolute((1, 0, 0), (0, 0, 0), 1, (0, 360))

    def test_dict_round_trip(self):
        j = JointRecord.revolute((0, 1, 1), (0.1, 0, 0.3), 2, (0, 45), parent=1)
        back = JointRecord.from_dict(j.to_dict())
        assert np.allclose(back.axis, j.axis) and np.allclose(back.pivot, j.pivot)
        assert back.parent == 1 and back.limits == (0.0, 45.0)
        assert "q" not in JointRecord.prismatic((1, 0, 0), 1).to_dict()


class TestPartTree:
    def test_children_must_cover_parts(self):
        with pytest.raises(InvalidTreeError):
            PartTree((JointRecord.prismatic((1, 0, 0), 2),))

    def test_cycle_rejected(self):
        a = JointRecord.prismatic((1, 0, 0), 1, parent=2)
        b = JointRecord.prismatic((1, 0, 0), 2, parent=1)
        with pytest.raises(InvalidTreeError):
            PartTree((a, b))

    def test_json_round_trip(self):
        tree = TEMPLATES["robot_arm"].tree
        back = PartTree.from_json(tree.to_json())
        assert back.part_count == 7 and back.is_chain
        assert back.joint_types == tree.joint_types

    def test_drawer_has_four_parts(self):
        assert TEMPLATES["drawer"].tree.part_count == 4
        assert set(TEMPLATES["drawer"].tree.joint_types) == {"prismatic"}


class TestFK:
    def test_zero_state_is_rest(self):
        parent = PoseSE3(rot_z(30), [0.1, 0.2, 0.3])
        for name, tmpl in TEMPLATES.items():
            states = [j.limits[0] for j in tmpl.tree.joints]
            for pose in recover_articulated_pose(parent, tmpl.tree, states):
                assert rotation_error(pose.rotation, parent.rotation) < 1e-9
                assert np.allclose(pose.translation, parent.translation, atol=1e-12)

    def test_revolute_keeps_pivot_fixed(self):
        j = JointRecord.revolute((1, 0, 0), (0, 0.11, 0.02), 1, (0, 150))
        parent = PoseSE3(rot_x(17), [0, 0, 0.5])
        child = child_pose_fk(parent, j, 73.0)
        assert np.allclose(child.apply(j.pivot), parent.apply(j.pivot), atol=1e-15)

    def test_prismatic_translates_along_axis(self):
        j = JointRecord.prismatic((0, -1, 0), 1, (0, 0.3))
        parent = PoseSE3(rot_z(90), [0, 0, 0])
        child = child_pose_fk(parent, j, 0.2)
        assert np.allclose(child.translation, rot_z(90) @ np.array([0, -0.2, 0]))

    def test_limits_enforced(self):
        j = JointRecord.prismatic((1, 0, 0), 1, (0, 0.3))
        with pytest.raises(JointLimitError):
            child_pose_fk(PoseSE3.identity(), j, 0.31)

    def test_state_count_checked(self):
        with pytest.raises(InvalidTreeError):
            recover_articulated_pose(PoseSE3.identity(), TEMPLATES["laptop"].tree, [])

    @pytest.mark.parametrize("name", sorted(TEMPLATES))
    def test_matches_quaternion_oracle(self, name, rng):
        tree = TEMPLATES[name].tree
        for _ in range(200):
            parent = PoseSE3(random_rotation(rng), rng.uniform(-1, 1, 3))
            states = [rng.uniform(*j.limits) for j in tree.joints]
            poses = recover_articulated_pose(parent, tree, states)
            for pose, (q, t) in zip(poses, quaternion_fk(parent.rotation, parent.translation, tree, states)):
                assert quat_angle_deg(quat_from_matrix(pose.rotation), q) <= 1e-9
                assert np.max(np.abs(pose.translation - t)) <= 1e-12

    def test_chain_composes_pairwise(self, rng):
        tree = TEMPLATES["robot_arm"].tree
        states = [rng.uniform(*j.limits) for j in tree.joints]
        parent = PoseSE3(random_rotation(rng), [0, 0, 0.5])
        poses = recover_articulated_pose(parent, tree, states)
        for j, s in zip(tree.joints, states):
            expect = poses[j.parent] @ j.motion(s)
            assert np.allclose(poses[j.child].matrix, expect.matrix, atol=1e-14)


class TestOrthogonalize:
    @settings(max_examples=200)
    @given(unit_vectors, unit_vectors)
    def test_orthonormal(self, a, b):
        a = np.array(a) / np.linalg.norm(a)
        b = np.array(b)
        if np.linalg.norm(np.cross(a, b)) / np.linalg.norm(b) < 1e-3:
            return
        out = orthogonalize(a, b)
        assert abs(np.dot(a, out)) <= 1e-12
        assert abs(np.linalg.norm(out) - 1) <= 1e-12
        assert np.dot(out, b) > 0

    def test_parallel_rejected(self):
        with pytest.raises(DegenerateAxisError):
            orthogonalize(np.array([0, 0, 1.0]), np.array([0, 0, 3.0]))
        with pytest.raises(DegenerateAxisError):
            joint_frame([1, 0, 0], [0, 0, 0])

    def test_idempotent(self):
        a = np.array([0.0, 0.6, 0.8])
        b = orthogonalize(a, [1.0, 1.0, 0.0])
        assert np.allclose(orthogonalize(a, b), b, atol=1e-15)


class TestAxisMetrics:
    def test_sign_invariant(self):
        j = JointRecord.revolute((1, 0, 0), (0, 0, 0), 1)
        flipped = JointRecord.revolute((-1, 0, 0), (0.5, 0, 0), 1)
        assert axis_metrics(j, flipped) == (0.0, 0.0)

    def test_offset_parallel_lines(self):
        a = JointRecord.revolute((0, 0, 1), (0, 0, 0), 1)
        b = JointRecord.revolute((0, 0, 1), (0.3, 0.4, 7.0), 1)
        ang, dist = axis_metrics(a, b)
        assert ang == 0.0 and dist == pytest.approx(0.5)

    def test_skew_lines(self):
        a = JointRecord.revolute((1, 0, 0), (0, 0, 0), 1)
        b = JointRecord.revolute((0, 1, 0), (0, 0, 0.25), 1)
        ang, dist = axis_metrics(a, b)
        assert ang == pytest.approx(90.0) and dist == pytest.approx(0.25)

    def test_prismatic_has_no_distance(self):
        a = JointRecord.prismatic((1, 0, 0), 1)
        b = JointRecord.prismatic(axis_angle((0, 0, 1), 3.0) @ np.array([1.0, 0, 0]), 1)
        ang, dist = axis_metrics(a, b)
        assert ang == pytest.approx(3.0) and dist is None

    def test_type_mismatch(self):
        with pytest.raises(InvalidComparisonError):
            axis_metrics(JointRecord.prismatic((1, 0, 0), 1), JointRecord.revolute((1, 0, 0), (0, 0, 0), 1))

    def test_tiny_angle_precision(self):
        a = JointRecord.prismatic((1, 0, 0), 1)
        b = JointRecord.prismatic(axis_angle((0, 0, 1), 1e-7) @ np.array([1.0, 0, 0]), 1)
        assert axis_metrics(a, b)[0] == pytest.approx(1e-7, rel=1e-6)
