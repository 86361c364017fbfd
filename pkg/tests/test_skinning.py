"""Linear-blend skinning and skin-weight interpolation."""
from __future__ import annotations

import numpy as np
import pytest

from meshtear.errors import BadWeights
from meshtear.skinning import (MAX_BONES_PER_VERTEX, Skeleton,
                               interpolate_skin, interpolate_skin_bary,
                               lbs_point, lbs_points)


def two_bone_skeleton():
    bind = np.array([np.eye(4), np.eye(4)])
    bind[1][0, 3] = 1.0  # second bone binds one unit along x
    return Skeleton(parents=[-1, 0], bind=bind)


class TestSkeleton:
    def test_identity_pose_is_identity_transform(self):
        sk = two_bone_skeleton()
        v = np.array([0.3, 0.4, 0.5])
        assert lbs_point(v, [(0, 0.5), (1, 0.5)], sk) == pytest.approx(v)

    def test_topological_order_enforced(self):
        with pytest.raises(BadWeights):
            Skeleton(parents=[1, -1], bind=np.array([np.eye(4), np.eye(4)]))

    def test_translation_pose_moves_weighted_point(self):
        sk = two_bone_skeleton()
        pose = np.array([np.eye(4), np.eye(4)])
        pose[1] = sk.bind[1].copy()
        pose[1][1, 3] = 2.0  # bone 1 translated 2 along y from bind
        sk.set_pose(pose)
        v = np.array([1.0, 0.0, 0.0])
        assert lbs_point(v, [(1, 1.0)], sk) == pytest.approx([1.0, 2.0, 0.0])
        assert lbs_point(v, [(0, 0.5), (1, 0.5)], sk) == pytest.approx(
            [1.0, 1.0, 0.0])

    def test_pose_bone_count_checked(self):
        sk = two_bone_skeleton()
        with pytest.raises(BadWeights):
            sk.set_pose(np.array([np.eye(4)]))


class TestLbs:
    def test_unnormalized_weights_rejected(self):
        sk = two_bone_skeleton()
        with pytest.raises(BadWeights):
            lbs_point(np.zeros(3), [(0, 0.4)], sk)

    def test_batch_matches_single(self):
        sk = two_bone_skeleton()
        pose = np.array([np.eye(4), np.eye(4)])
        pose[1][2, 3] = 1.5
        sk.set_pose(pose)
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(5, 3))
        wls = [[(0, 1.0)], [(1, 1.0)], [(0, 0.5), (1, 0.5)],
               [(0, 0.25), (1, 0.75)], [(0, 1.0)]]
        batch = lbs_points(pts, wls, sk)
        for i in range(5):
            assert batch[i] == pytest.approx(lbs_point(pts[i], wls[i], sk))

    def test_rigid_rotation_preserves_distances(self):
        sk = two_bone_skeleton()
        angle = 0.7
        rot = np.eye(4)
        rot[:2, :2] = [[np.cos(angle), -np.sin(angle)],
                       [np.sin(angle), np.cos(angle)]]
        sk.set_pose(np.array([rot @ sk.bind[0], rot @ sk.bind[1]]))
        a = lbs_point(np.array([1.0, 0, 0]), [(0, 1.0)], sk)
        b = lbs_point(np.array([0.0, 1, 0]), [(0, 1.0)], sk)
        assert np.linalg.norm(a - b) == pytest.approx(np.sqrt(2.0))


class TestInterpolation:
    def test_endpoints_exact(self):
        wa, wb = [(0, 1.0)], [(1, 1.0)]
        assert interpolate_skin(wa, wb, 0.0) == wa
        assert interpolate_skin(wa, wb, 1.0) == wb

    def test_midpoint_blend_normalized(self):
        out = dict(interpolate_skin([(0, 1.0)], [(1, 1.0)], 0.5))
        assert out[0] == pytest.approx(0.5)
        assert out[1] == pytest.approx(0.5)

    def test_out_of_range_t_rejected(self):
        with pytest.raises(ValueError):
            interpolate_skin([(0, 1.0)], [(1, 1.0)], 1.5)

    def test_bary_blend_sums_to_one(self):
        wls = [[(0, 1.0)], [(1, 1.0)], [(0, 0.5), (2, 0.5)]]
        out = interpolate_skin_bary(wls, np.array([0.2, 0.3, 0.5]))
        assert sum(w for _, w in out) == pytest.approx(1.0)

    def test_prune_keeps_at_most_four_bones(self):
        wls = [[(b, 1.0 / 3.0) for b in (0, 1, 2)],
               [(b, 1.0 / 3.0) for b in (3, 4, 5)],
               [(b, 1.0 / 3.0) for b in (6, 7, 8)]]
        out = interpolate_skin_bary(wls, np.array([1, 1, 1]) / 3.0)
        assert len(out) <= MAX_BONES_PER_VERTEX
        assert sum(w for _, w in out) == pytest.approx(1.0)
