"""Minimal linear-blend skinning and skin-weight interpolation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadWeights

MAX_BONES_PER_VERTEX = 4
PRUNE_THRESHOLD = 1e-4


@dataclass
class Skeleton:
    """Topologically ordered bone list with bind and current pose matrices."""

    parents: list                 # parent index per bone, -1 for roots
    bind: np.ndarray              # (B, 4, 4) bind matrices
    names: list = field(default_factory=list)
    pose: np.ndarray | None = None  # (B, 4, 4) current pose, bind if None

    def __post_init__(self):
        self.bind = np.asarray(self.bind, dtype=np.float64).reshape(-1, 4, 4)
        for i, p in enumerate(self.parents):
            if p >= i:
                raise BadWeights("skeleton bones must be topologically ordered")
        if not self.names:
            self.names = [f"bone{i}" for i in range(len(self.parents))]
        if self.pose is None:
            self.pose = self.bind.copy()  # rest pose: skinning is a no-op
        self._refresh_skinning_matrices()

    def set_pose(self, pose):
        self.pose = np.asarray(pose, dtype=np.float64).reshape(-1, 4, 4)
        if len(self.pose) != len(self.parents):
            raise BadWeights("pose must supply one matrix per bone")
        self._refresh_skinning_matrices()

    def _refresh_skinning_matrices(self):
        # pose_b . bind_b^-1, precomputed once per pose change
        self.skin_mats = self.pose @ np.linalg.inv(self.bind)


def lbs_point(v, weights, skeleton: Skeleton):
    """Pose one rest-space point: sum_b w_b . Pose_b . Bind_b^-1 . v."""
    s = sum(w for _, w in weights)
    if abs(s - 1.0) > 1e-6:
        raise BadWeights(f"weights sum to {s}")
    h = np.append(np.asarray(v, dtype=np.float64), 1.0)
    out = np.zeros(4)
    for bone, w in weights:
        out += w * (skeleton.skin_mats[bone] @ h)
    return out[:3]


def lbs_points(points, weight_lists, skeleton: Skeleton):
    """Vectorized lbs_point over several points with per-point weight lists."""
    points = np.asarray(points, dtype=np.float64)
    out = np.zeros_like(points)
    h = np.concatenate([points, np.ones((len(points), 1))], axis=1)
    for i, weights in enumerate(weight_lists):
        m = np.zeros((4, 4))
        for bone, w in weights:
            m += w * skeleton.skin_mats[bone]
        out[i] = (m @ h[i])[:3]
    return out


def _prune(weights):
    weights = [(b, w) for b, w in weights if w > PRUNE_THRESHOLD]
    weights.sort(key=lambda bw: (-bw[1], bw[0]))
    weights = weights[:MAX_BONES_PER_VERTEX]
    s = sum(w for _, w in weights)
    return [(b, w / s) for b, w in weights]


def interpolate_skin(weights_a, weights_b, t):
    """Blend two normalized bone-weight lists at parameter t in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must be in [0, 1]")
    if t == 0.0:
        return list(weights_a)
    if t == 1.0:
        return list(weights_b)
    acc = {}
    for bone, w in weights_a:
        acc[bone] = acc.get(bone, 0.0) + (1.0 - t) * w
    for bone, w in weights_b:
        acc[bone] = acc.get(bone, 0.0) + t * w
    return _prune(sorted(acc.items()))


def interpolate_skin_bary(weight_lists, bary):
    """Barycentric blend of three corner weight lists."""
    acc = {}
    for wl, b in zip(weight_lists, bary):
        if b <= 0.0:
            continue
        for bone, w in wl:
            acc[bone] = acc.get(bone, 0.0) + b * w
    if not acc:
        return []
    return _prune(sorted(acc.items()))
