"""Versioned JSON carrier for joint trajectories."""
from __future__ import annotations

import json

import numpy as np

from .errors import TrajectoryFormatError
from .skeleton import JointTrajectory

SCHEMA_VERSION = 1


def trajectory_to_dict(trajectory, joint_names):
    if len(joint_names) != trajectory.joint_count:
        raise TrajectoryFormatError("joint_names length does not match trajectory")
    return {
        "v": SCHEMA_VERSION,
        "fps": trajectory.fps,
        "joint_names": list(joint_names),
        "mask": [bool(m) for m in trajectory.mask],
        "frames": trajectory.positions.tolist(),
    }


def trajectory_from_dict(data):
    if not isinstance(data, dict):
        raise TrajectoryFormatError("trajectory JSON must be an object")
    if data.get("v") != SCHEMA_VERSION:
        raise TrajectoryFormatError(
            f"unsupported trajectory schema version {data.get('v')!r}"
        )
    for key in ("fps", "joint_names", "frames"):
        if key not in data:
            raise TrajectoryFormatError(f"trajectory JSON missing {key!r}")
    names = list(data["joint_names"])
    try:
        frames = np.asarray(data["frames"], dtype=float)
    except ValueError as exc:
        raise TrajectoryFormatError("frames are not a rectangular TxNx3 grid") from exc
    if frames.ndim != 3 or frames.shape[2] != 3:
        raise TrajectoryFormatError("frames are not a rectangular TxNx3 grid")
    if frames.shape[1] != len(names):
        raise TrajectoryFormatError("joint_names length does not match frames")
    mask = data.get("mask")
    if mask is None:
        mask = np.ones(len(names), dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (len(names),):
            raise TrajectoryFormatError("mask length does not match joint_names")
    try:
        traj = JointTrajectory(positions=frames, mask=mask, fps=float(data["fps"]))
    except Exception as exc:
        raise TrajectoryFormatError(str(exc)) from exc
    return traj, names


def save_trajectory(path, trajectory, joint_names):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trajectory_to_dict(trajectory, joint_names), fh)
        fh.write("\n")


def load_trajectory(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TrajectoryFormatError(f"invalid JSON: {exc}") from exc
    return trajectory_from_dict(data)
