"""Sequence and rest-pose normalization into the [-1, 1]^3 working space."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .skeleton import JointTrajectory, Skeleton, rest_pose_positions

_DEGENERATE_EXTENT = 1e-12


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.array(self.min, dtype=float)
        hi = np.array(self.max, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(lo > hi):
            raise ValidationError("Aabb requires min <= max componentwise")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def center(self):
        return (self.min + self.max) / 2.0

    @property
    def extent(self):
        return self.max - self.min

    @property
    def max_extent(self):
        return float(np.max(self.extent))

    @staticmethod
    def of_points(points):
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if points.shape[0] == 0:
            raise ValidationError("Aabb of an empty point set")
        return Aabb(points.min(axis=0), points.max(axis=0))


@dataclass(frozen=True)
class NormalizationTransform:
    """x' = (x - center) * scale, inverted by x = x'/scale + center."""

    center: np.ndarray
    scale: float

    def __post_init__(self):
        center = np.array(self.center, dtype=float)
        if center.shape != (3,) or not np.all(np.isfinite(center)):
            raise ValidationError("transform center must be a finite 3-vector")
        if not (self.scale > 0.0) or not np.isfinite(self.scale):
            raise ValidationError("transform scale must be positive and finite")
        object.__setattr__(self, "center", center)

    def apply(self, points):
        return (np.asarray(points, dtype=float) - self.center) * self.scale

    def invert(self, points):
        return np.asarray(points, dtype=float) / self.scale + self.center


def rest_normalize(skeleton, extra_points=None):
    """Scale offsets so the rest-pose bounding box has unit max extent.

    extra_points (e.g. BVH End Site tips, world space) widen the box but are
    not part of the returned skeleton. Scaling is uniform to preserve shape.
    """
    pts = rest_pose_positions(skeleton)
    if extra_points is not None and len(extra_points) > 0:
        pts = np.vstack([pts, np.asarray(extra_points, dtype=float).reshape(-1, 3)])
    box = Aabb.of_points(pts)
    if box.max_extent < _DEGENERATE_EXTENT:
        raise ValidationError("degenerate rest pose: zero bounding-box extent")
    scale = 1.0 / box.max_extent
    scaled = Skeleton(
        joint_names=skeleton.joint_names,
        parents=skeleton.parents.copy(),
        offsets=skeleton.offsets * scale,
        source_order=skeleton.source_order.copy(),
    )
    return scaled, NormalizationTransform(center=np.zeros(3), scale=scale)


def remove_global_translation(trajectory, root_index=0):
    """Subtract the root position from every joint, per frame.

    Returns the recentred trajectory and the extracted per-frame root
    positions, so reattach_global_translation can invert exactly.
    """
    if not trajectory.mask[root_index]:
        raise ValidationError("root joint is masked out; cannot remove translation")
    roots = trajectory.positions[:, root_index, :].copy()
    recentred = trajectory.positions - roots[:, None, :]
    out = JointTrajectory(positions=recentred, mask=trajectory.mask, fps=trajectory.fps)
    return out, roots


def reattach_global_translation(trajectory, roots):
    roots = np.asarray(roots, dtype=float)
    if roots.shape != (trajectory.frame_count, 3):
        raise ValidationError("root position list does not match frame count")
    return JointTrajectory(
        positions=trajectory.positions + roots[:, None, :],
        mask=trajectory.mask,
        fps=trajectory.fps,
    )


def sequence_super_aabb(trajectory):
    """Bounding box over all frames, mask-valid joints only."""
    return Aabb.of_points(trajectory.positions[:, trajectory.mask, :])


def sequence_normalize(trajectory):
    """Uniformly scale the whole sequence into [-1, 1]^3.

    center = super-box midpoint, scale = 2 / max extent; masked joints never
    influence the box.
    """
    box = sequence_super_aabb(trajectory)
    if box.max_extent < _DEGENERATE_EXTENT:
        raise ValidationError("degenerate sequence: zero bounding-box extent")
    transform = NormalizationTransform(center=box.center, scale=2.0 / box.max_extent)
    out = JointTrajectory(
        positions=transform.apply(trajectory.positions),
        mask=trajectory.mask,
        fps=trajectory.fps,
    )
    return out, transform


def sequence_denormalize(trajectory, transform):
    return JointTrajectory(
        positions=transform.invert(trajectory.positions),
        mask=trajectory.mask,
        fps=trajectory.fps,
    )
