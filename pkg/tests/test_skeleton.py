"""Kinematic-tree validation, forward kinematics, and bone segments."""

import numpy as np
import pytest

from rigfit import (
    AnimationClip,
    Pose,
    SkeletonError,
    ValidationError,
    bone_segments,
    fk_sequence,
    forward_kinematics,
    rest_pose_positions,
    validate_skeleton,
)
from rigfit.skeleton import identity_pose
from tests.conftest import random_skeleton, smooth_clip


def simple_chain(n=3, step=(0.0, 0.0, 1.0)):
    offsets = [np.zeros(3)] + [np.array(step, dtype=float)] * (n - 1)
    return validate_skeleton([f"j{i}" for i in range(n)], [-1] + list(range(n - 1)), offsets)


class TestValidateSkeleton:
    def test_valid_chain(self):
        sk = validate_skeleton(["a", "b", "c"], [-1, 0, 1], np.zeros((3, 3)))
        assert sk.joint_count == 3
        assert list(sk.parents) == [-1, 0, 1]

    def test_cycle_error(self):
        with pytest.raises(SkeletonError) as e:
            validate_skeleton(["a", "b"], [1, 0], np.zeros((2, 3)))
        assert any("cycle" in v.lower() for v in e.value.violations)

    def test_multiple_roots_error(self):
        with pytest.raises(SkeletonError) as e:
            validate_skeleton(["a", "b", "c"], [-1, -1, 0], np.zeros((3, 3)))
        assert any("root" in v.lower() for v in e.value.violations)

    def test_out_of_range_parent_error(self):
        with pytest.raises(SkeletonError):
            validate_skeleton(["a", "b"], [-1, 5], np.zeros((2, 3)))

    def test_length_mismatch(self):
        with pytest.raises(SkeletonError):
            validate_skeleton(["a"], [-1, 0], np.zeros((2, 3)))

    def test_reorders_to_topological_with_remap(self):
        # child listed before its parent in the source arrays
        sk = validate_skeleton(
            ["child", "root"], [1, -1], [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]
        )
        assert sk.joint_names[0] == "root"
        assert sk.parents[0] == -1
        np.testing.assert_allclose(sk.offsets[1], [0, 0, 1])
        # source_order maps canonical index -> original index
        assert list(sk.source_order) == [1, 0]


class TestForwardKinematics:
    def test_identity_pose_sums_offsets(self):
        sk = simple_chain(4)
        P = forward_kinematics(sk, identity_pose(sk))
        np.testing.assert_allclose(P[:, 2], [0, 1, 2, 3])

    def test_hand_derived_rx90_chain(self):
        # root->A->B, offsets (0,0,1), root rotated +90 deg about x
        sk = simple_chain(3)
        pose = Pose(rotations=[[np.pi / 2, 0, 0], [0, 0, 0], [0, 0, 0]])
        P = forward_kinematics(sk, pose)
        np.testing.assert_allclose(P[1], [0, -1, 0], atol=1e-12)
        np.testing.assert_allclose(P[2], [0, -2, 0], atol=1e-12)

    def test_translation_equivariance(self, rng):
        sk = random_skeleton(rng, 8)
        rots = rng.normal(size=(8, 3))
        t = np.array([1.0, -2.0, 0.5])
        P0 = forward_kinematics(sk, Pose(rotations=rots))
        Pt = forward_kinematics(sk, Pose(rotations=rots, root_translation=t))
        np.testing.assert_allclose(Pt, P0 + t, atol=1e-12)

    def test_bone_lengths_preserved(self, rng):
        sk = random_skeleton(rng, 12)
        rest_len = np.linalg.norm(sk.offsets[1:], axis=1)
        for _ in range(20):
            P = forward_kinematics(sk, Pose(rotations=rng.normal(size=(12, 3))))
            lengths = np.linalg.norm(P[1:] - P[sk.parents[1:]], axis=1)
            np.testing.assert_allclose(lengths, rest_len, rtol=1e-9)

    def test_rotation_count_mismatch(self):
        sk = simple_chain(3)
        with pytest.raises(ValidationError):
            forward_kinematics(sk, Pose(rotations=np.zeros((2, 3))))


class TestFkSequence:
    def test_single_frame_matches_forward_kinematics(self, rng):
        sk = random_skeleton(rng, 5)
        clip = smooth_clip(rng, 5, 1)
        traj = fk_sequence(sk, clip)
        np.testing.assert_allclose(traj.positions[0], forward_kinematics(sk, clip.frames[0]))
        assert traj.fps == clip.fps
        assert traj.mask.all()

    def test_constant_identity_clip(self):
        sk = simple_chain(3)
        clip = AnimationClip(frames=tuple(identity_pose(sk) for _ in range(5)), fps=24.0)
        traj = fk_sequence(sk, clip)
        rest = rest_pose_positions(sk)
        for t in range(5):
            np.testing.assert_allclose(traj.positions[t], rest)

    def test_rows_match_per_frame_oracle(self, rng):
        sk = random_skeleton(rng, 9)
        clip = smooth_clip(rng, 9, 12)
        traj = fk_sequence(sk, clip)
        for t, pose in enumerate(clip.frames):
            np.testing.assert_allclose(traj.positions[t], forward_kinematics(sk, pose), atol=1e-12)


class TestRestPose:
    def test_equals_identity_fk(self, rng):
        for n in (2, 5, 11):
            sk = random_skeleton(rng, n)
            np.testing.assert_allclose(
                rest_pose_positions(sk), forward_kinematics(sk, identity_pose(sk))
            )


class TestBoneSegments:
    def test_two_joint_chain(self):
        sk = simple_chain(2)
        segs = bone_segments(sk, rest_pose_positions(sk))
        assert segs.shape == (1, 2, 3)
        np.testing.assert_allclose(segs[0], [[0, 0, 0], [0, 0, 1]])

    def test_star_shares_root_endpoint(self):
        sk = validate_skeleton(
            ["r", "a", "b"], [-1, 0, 0], [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
        )
        segs = bone_segments(sk, rest_pose_positions(sk))
        assert segs.shape == (2, 2, 3)
        np.testing.assert_allclose(segs[0, 0], [0, 0, 0])
        np.testing.assert_allclose(segs[1, 0], [0, 0, 0])

    def test_tree_has_n_minus_one_segments(self, rng):
        for n in (2, 7, 20):
            sk = random_skeleton(rng, n)
            segs = bone_segments(sk, rest_pose_positions(sk))
            assert segs.shape[0] == n - 1


class TestTypes:
    def test_pose_canonicalizes_rotations(self):
        pose = Pose(rotations=[[0.0, 0.0, 1.5 * np.pi]])
        assert np.linalg.norm(pose.rotations[0]) <= np.pi + 1e-12

    def test_pose_rejects_nonfinite(self):
        with pytest.raises(ValidationError):
            Pose(rotations=[[np.nan, 0.0, 0.0]])

    def test_clip_needs_frames(self):
        with pytest.raises(ValidationError):
            AnimationClip(frames=(), fps=30.0)

    def test_immutability(self, rng):
        sk = random_skeleton(rng, 4)
        with pytest.raises(ValueError):
            sk.offsets[0] = 1.0
