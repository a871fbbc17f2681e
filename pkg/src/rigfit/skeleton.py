"""Kinematic-tree data model and forward kinematics over arbitrary rigs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SkeletonError, ValidationError
from .rotations import (
    axis_angle_to_matrix,
    batch_axis_angle_to_matrix,
    canonicalize_axis_angle,
)

_ZERO_OFFSET_EPS = 1e-12


@dataclass(frozen=True)
class Skeleton:
    """Joint names, parent indices and rest-pose offsets, in topological order.

    parents[i] < i holds for every non-root joint; index 0 is the root.
    source_order maps canonical index -> index in the original input lists.
    zero_offset flags joints whose rest offset has (near-)zero length, which
    the IK stage skips for direction alignment.
    """

    joint_names: tuple
    parents: np.ndarray
    offsets: np.ndarray
    source_order: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        for name, dtype in (("parents", int), ("offsets", float), ("source_order", int)):
            arr = np.asarray(getattr(self, name), dtype=dtype)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def joint_count(self):
        return len(self.joint_names)

    @property
    def root(self):
        return 0

    @property
    def zero_offset(self):
        lengths = np.linalg.norm(self.offsets, axis=1)
        flags = lengths < _ZERO_OFFSET_EPS
        flags[0] = True  # the root carries no bone
        return flags

    def children(self):
        """List of child-index lists, canonical order."""
        out = [[] for _ in range(self.joint_count)]
        for i, p in enumerate(self.parents):
            if p >= 0:
                out[p].append(i)
        return out


@dataclass(frozen=True)
class Pose:
    """Per-joint local rotations (axis-angle, canonicalized) plus root position."""

    rotations: np.ndarray
    root_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.asarray(self.rotations, dtype=float)
        if rot.ndim != 2 or rot.shape[1] != 3 or not np.all(np.isfinite(rot)):
            raise ValidationError("Pose.rotations must be a finite Nx3 array")
        rot = np.stack([canonicalize_axis_angle(r) for r in rot])
        trans = np.array(self.root_translation, dtype=float)
        if trans.shape != (3,) or not np.all(np.isfinite(trans)):
            raise ValidationError("Pose.root_translation must be a finite 3-vector")
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "root_translation", trans)
        rot.flags.writeable = False
        trans.flags.writeable = False

    @property
    def joint_count(self):
        return self.rotations.shape[0]


@dataclass(frozen=True)
class AnimationClip:
    """A Pose sequence at a fixed frame rate."""

    frames: tuple
    fps: float

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 1:
            raise ValidationError("AnimationClip needs at least one frame")
        n = frames[0].joint_count
        if any(f.joint_count != n for f in frames):
            raise ValidationError("AnimationClip frames disagree on joint count")
        if not (self.fps > 0.0):
            raise ValidationError("AnimationClip.fps must be positive")
        object.__setattr__(self, "frames", frames)

    @property
    def frame_count(self):
        return len(self.frames)

    @property
    def joint_count(self):
        return self.frames[0].joint_count


@dataclass(frozen=True)
class JointTrajectory:
    """T x N grid of world-space joint positions with a joint-validity mask."""

    positions: np.ndarray
    mask: np.ndarray
    fps: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 3 or pos.shape[2] != 3:
            raise ValidationError("JointTrajectory.positions must be TxNx3")
        if self.mask is None:
            mask = np.ones(pos.shape[1] if pos.ndim == 3 else 0, dtype=bool)
        else:
            mask = np.array(self.mask, dtype=bool)
        if mask.shape != (pos.shape[1],):
            raise ValidationError("JointTrajectory.mask must have one flag per joint")
        if not mask.any():
            raise ValidationError("JointTrajectory.mask must have >= 1 valid joint")
        if not np.all(np.isfinite(pos[:, mask, :])):
            raise ValidationError("JointTrajectory has non-finite valid positions")
        if not (self.fps > 0.0):
            raise ValidationError("JointTrajectory.fps must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "mask", mask)
        pos.flags.writeable = False
        mask.flags.writeable = False

    @property
    def frame_count(self):
        return self.positions.shape[0]

    @property
    def joint_count(self):
        return self.positions.shape[1]


def validate_skeleton(joint_names, parents, offsets):
    """Build a canonical Skeleton or raise SkeletonError naming every violation.

    Input joints may be in any order; the result is reordered parent-first
    with source_order recording the original index of each canonical joint.
    """
    names = list(joint_names)
    parents = list(parents)
    offs = np.asarray(offsets, dtype=float)
    violations = []
    n = len(names)
    if len(parents) != n or offs.shape != (n, 3):
        raise SkeletonError(["input lists have unequal lengths"])
    if n == 0:
        raise SkeletonError(["skeleton has no joints"])
    if not np.all(np.isfinite(offs)):
        violations.append("non-finite offsets")
    roots = [i for i, p in enumerate(parents) if p == -1]
    if len(roots) == 0:
        violations.append("no root joint (parent -1)")
    elif len(roots) > 1:
        violations.append(f"multiple roots at indices {roots}")
    for i, p in enumerate(parents):
        if p != -1 and not (0 <= p < n):
            violations.append(f"joint {i} has out-of-range parent {p}")
        if p == i:
            violations.append(f"joint {i} is its own parent")
    parents_in_range = all(p == -1 or 0 <= p < n for p in parents)
    if parents_in_range:
        # parent-chain walk with colouring finds cycles even without a root
        state = [0] * n  # 0 unvisited, 1 on current walk, 2 done
        for start in range(n):
            walk = []
            i = start
            while i != -1 and state[i] == 0:
                state[i] = 1
                walk.append(i)
                i = parents[i]
            if i != -1 and state[i] == 1:
                violations.append(f"cycle detected through joint {i}")
            for j in walk:
                state[j] = 2
    if violations:
        raise SkeletonError(violations)
    # Kahn's algorithm, preferring original index order for a stable remap
    children = [[] for _ in range(n)]
    for i, p in enumerate(parents):
        if p >= 0:
            children[p].append(i)
    order = []
    stack = [roots[0]]
    while stack:
        i = stack.pop()
        order.append(i)
        stack.extend(reversed(children[i]))
    if len(order) != n:
        unreachable = sorted(set(range(n)) - set(order))
        raise SkeletonError([f"cycle detected: joints {unreachable} unreachable from root"])
    remap = {orig: new for new, orig in enumerate(order)}
    new_parents = np.array(
        [-1 if parents[i] == -1 else remap[parents[i]] for i in order], dtype=int
    )
    skel = Skeleton(
        joint_names=tuple(names[i] for i in order),
        parents=new_parents,
        offsets=offs[order].copy(),
        source_order=np.array(order, dtype=int),
    )
    return skel


def forward_kinematics(skeleton, pose):
    """World-space joint positions in one parent-first pass.

    P_root = root_translation; P_i = P_parent + G_parent @ offset_i with the
    global rotation G accumulating down the chain.
    """
    if pose.joint_count != skeleton.joint_count:
        raise ValidationError("pose joint count does not match skeleton")
    positions, _ = fk_positions_and_frames(
        skeleton, pose.rotations, pose.root_translation
    )
    return positions


def fk_positions_and_frames(skeleton, rotations, root_translation):
    """FK returning positions (N,3) and accumulated world rotations (N,3,3)."""
    n = skeleton.joint_count
    P = np.empty((n, 3))
    G = np.empty((n, 3, 3))
    parents = skeleton.parents
    offsets = skeleton.offsets
    R = batch_axis_angle_to_matrix(np.asarray(rotations, dtype=float))
    P[0] = root_translation
    G[0] = R[0]
    for i in range(1, n):
        p = parents[i]
        P[i] = P[p] + G[p] @ offsets[i]
        G[i] = G[p] @ R[i]
    return P, G


def fk_sequence(skeleton, clip):
    """Per-frame forward kinematics of a clip as an all-valid trajectory."""
    if clip.joint_count != skeleton.joint_count:
        raise ValidationError("clip joint count does not match skeleton")
    pos = np.stack([forward_kinematics(skeleton, f) for f in clip.frames])
    return JointTrajectory(
        positions=pos, mask=np.ones(skeleton.joint_count, dtype=bool), fps=clip.fps
    )


def identity_pose(skeleton):
    return Pose(rotations=np.zeros((skeleton.joint_count, 3)))


def rest_pose_positions(skeleton):
    """Joint positions with all rotations identity and the root at the origin."""
    return forward_kinematics(skeleton, identity_pose(skeleton))


def bone_segments(skeleton, positions):
    """(parent-position, child-position) pairs for every non-root joint."""
    positions = np.asarray(positions, dtype=float)
    if positions.shape != (skeleton.joint_count, 3):
        raise ValidationError("positions must be Nx3 for this skeleton")
    segs = [
        (positions[p], positions[i])
        for i, p in enumerate(skeleton.parents)
        if p >= 0
    ]
    return np.array(segs).reshape(-1, 2, 3)
