"""BVH hierarchy + motion parser and canonical writer.

Degrees live in the file, radians (axis-angle) in memory; conversion happens
only at this boundary. End Sites are kept as leaf metadata, not joints.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BvhParseError, ValidationError
from .rotations import (
    axis_angle_to_matrix,
    euler_to_matrix,
    matrix_to_axis_angle,
    matrix_to_euler,
)
from .skeleton import AnimationClip, Pose, Skeleton, validate_skeleton

_POSITION_CHANNELS = ("Xposition", "Yposition", "Zposition")
_ROTATION_CHANNELS = {"Xrotation": "X", "Yrotation": "Y", "Zrotation": "Z"}
_DEFAULT_ROT_CHANNELS = ("Zrotation", "Xrotation", "Yrotation")


@dataclass(frozen=True)
class BvhDocument:
    """A parsed BVH file: rig, per-joint channel layout, end sites and motion.

    channel_layout holds the CHANNELS tokens verbatim per joint (canonical
    joint order). end_sites maps joint index -> local End Site offset.
    extra_translations maps non-root joint index -> (T, 3) position-channel
    values, so files with 6-channel children round-trip faithfully.
    """

    skeleton: Skeleton
    channel_layout: tuple
    end_sites: dict
    clip: AnimationClip
    frame_time: float
    extra_translations: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.frame_time > 0.0):
            raise ValidationError("frame_time must be positive")
        if self.clip.joint_count != self.skeleton.joint_count:
            raise ValidationError("clip joint count does not match skeleton")
        if len(self.channel_layout) != self.skeleton.joint_count:
            raise ValidationError("channel layout must cover every joint")

    def end_site_world_positions(self):
        """Rest-pose world positions of all End Site tips."""
        from .skeleton import rest_pose_positions

        rest = rest_pose_positions(self.skeleton)
        return np.array(
            [rest[i] + off for i, off in sorted(self.end_sites.items())]
        ).reshape(-1, 3)


class _Tokens:
    def __init__(self, text):
        self.items = []  # (token, line)
        for ln, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, ln))
        self.pos = 0

    @property
    def line(self):
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return self.items[-1][1] if self.items else 0

    def peek(self):
        if self.pos >= len(self.items):
            raise BvhParseError("unexpected end of file", self.line)
        return self.items[self.pos][0]

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, *expected):
        tok = self.next()
        if tok not in expected:
            raise BvhParseError(
                f"expected {' / '.join(expected)}, got {tok!r}", self.items[self.pos - 1][1]
            )
        return tok

    def number(self):
        tok = self.next()
        try:
            return float(tok)
        except ValueError:
            raise BvhParseError(f"non-numeric literal {tok!r}", self.items[self.pos - 1][1])

    def integer(self):
        tok = self.next()
        try:
            return int(tok)
        except ValueError:
            raise BvhParseError(f"expected integer, got {tok!r}", self.items[self.pos - 1][1])

    def done(self):
        return self.pos >= len(self.items)


def _parse_joint(tokens, names, parents, offsets, channels, end_sites, parent):
    name = tokens.next()
    index = len(names)
    names.append(name)
    parents.append(parent)
    tokens.expect("{")
    tokens.expect("OFFSET")
    offsets.append([tokens.number(), tokens.number(), tokens.number()])
    tokens.expect("CHANNELS")
    count = tokens.integer()
    chans = tuple(tokens.next() for _ in range(count))
    line = tokens.line
    rot = [c for c in chans if c in _ROTATION_CHANNELS]
    pos = [c for c in chans if c in _POSITION_CHANNELS]
    for c in chans:
        if c not in _ROTATION_CHANNELS and c not in _POSITION_CHANNELS:
            raise BvhParseError(f"unknown channel name {c!r}", line)
    if len(rot) != 3 or len({_ROTATION_CHANNELS[c] for c in rot}) != 3:
        raise BvhParseError(f"joint {name!r} needs three distinct rotation channels", line)
    if pos and len(pos) != 3:
        raise BvhParseError(f"joint {name!r} has a partial position channel triple", line)
    channels.append(chans)
    while True:
        tok = tokens.next()
        if tok == "JOINT":
            _parse_joint(tokens, names, parents, offsets, channels, end_sites, index)
        elif tok == "End":
            tokens.expect("Site")
            tokens.expect("{")
            tokens.expect("OFFSET")
            end_sites[index] = np.array(
                [tokens.number(), tokens.number(), tokens.number()]
            )
            tokens.expect("}")
        elif tok == "}":
            return
        else:
            raise BvhParseError(
                f"expected JOINT, End Site or '}}', got {tok!r}", tokens.items[tokens.pos - 1][1]
            )


def _rotation_order(chans):
    return "".join(_ROTATION_CHANNELS[c] for c in chans if c in _ROTATION_CHANNELS)


def parse_bvh(text):
    """Recursive-descent parse of a BVH document."""
    tokens = _Tokens(text)
    tokens.expect("HIERARCHY")
    tokens.expect("ROOT")
    names, parents, offsets, channels, end_sites = [], [], [], [], {}
    _parse_joint(tokens, names, parents, offsets, channels, end_sites, -1)
    try:
        skeleton = validate_skeleton(names, parents, offsets)
    except ValidationError as exc:
        raise BvhParseError(str(exc)) from exc
    # file order is parent-first already, so the remap is the identity
    tokens.expect("MOTION")
    tok = tokens.next()
    if tok == "Frames:":
        frame_count = tokens.integer()
    elif tok == "Frames":
        tokens.expect(":")
        frame_count = tokens.integer()
    else:
        raise BvhParseError(f"expected 'Frames:', got {tok!r}", tokens.items[tokens.pos - 1][1])
    tok = tokens.next()
    if tok == "Frame":
        tok2 = tokens.next()
        if tok2 == "Time:":
            frame_time = tokens.number()
        elif tok2 == "Time":
            tokens.expect(":")
            frame_time = tokens.number()
        else:
            raise BvhParseError("expected 'Frame Time:'", tokens.items[tokens.pos - 1][1])
    else:
        raise BvhParseError("missing 'Frame Time:' declaration", tokens.items[tokens.pos - 1][1])
    if frame_count < 1:
        raise BvhParseError("BVH must declare at least one frame")
    if not (frame_time > 0.0):
        raise BvhParseError("frame time must be positive")

    n = skeleton.joint_count
    per_joint = [len(c) for c in channels]
    row_width = sum(per_joint)
    frames = []
    extra = {}
    for _ in range(frame_count):
        start_line = tokens.line
        row = np.empty(row_width)
        row_line = tokens.items[tokens.pos][1] if tokens.pos < len(tokens.items) else start_line
        for k in range(row_width):
            if tokens.done() or (k > 0 and tokens.line != row_line):
                raise BvhParseError(
                    f"motion row has {k} values, expected {row_width}", row_line
                )
            row[k] = tokens.number()
        if tokens.pos < len(tokens.items) and tokens.items[tokens.pos][1] == row_line:
            raise BvhParseError(f"motion row has extra values beyond {row_width}", row_line)
        rotations = np.zeros((n, 3))
        root_translation = np.zeros(3)
        offset = 0
        for j in range(n):
            chans = channels[j]
            order = _rotation_order(chans)
            angles = np.zeros(3)
            translation = np.zeros(3)
            has_pos = False
            ri = 0
            for c in chans:
                v = row[offset]
                offset += 1
                if c in _ROTATION_CHANNELS:
                    angles[ri] = np.deg2rad(v)
                    ri += 1
                else:
                    has_pos = True
                    translation["XYZ".index(c[0])] = v
            rotations[j] = matrix_to_axis_angle(euler_to_matrix(angles, order))
            if has_pos:
                if j == 0:
                    root_translation = translation
                else:
                    extra.setdefault(j, []).append(translation)
        frames.append(Pose(rotations=rotations, root_translation=root_translation))
    if not tokens.done():
        raise BvhParseError(
            f"motion data has more rows than the declared {frame_count}", tokens.line
        )
    clip = AnimationClip(frames=tuple(frames), fps=1.0 / frame_time)
    return BvhDocument(
        skeleton=skeleton,
        channel_layout=tuple(tuple(c) for c in channels),
        end_sites=end_sites,
        clip=clip,
        frame_time=frame_time,
        extra_translations={j: np.array(v) for j, v in extra.items()},
    )


def _fmt(v):
    out = f"{v:.6f}"
    return "0.000000" if out == "-0.000000" else out


def write_bvh(document):
    """Canonical serialization: 2-space indentation, uppercase keywords,
    fixed-point motion values, LF line endings. Deterministic byte output."""
    skel = document.skeleton
    clip = document.clip
    if clip.joint_count != skel.joint_count:
        raise ValidationError("clip joint count does not match skeleton")
    children = skel.children()
    lines = ["HIERARCHY"]

    def emit(j, depth):
        indent = "  " * depth
        keyword = "ROOT" if skel.parents[j] < 0 else "JOINT"
        lines.append(f"{indent}{keyword} {skel.joint_names[j]}")
        lines.append(f"{indent}{{")
        inner = "  " * (depth + 1)
        ox, oy, oz = skel.offsets[j]
        lines.append(f"{inner}OFFSET {_fmt(ox)} {_fmt(oy)} {_fmt(oz)}")
        chans = document.channel_layout[j]
        lines.append(f"{inner}CHANNELS {len(chans)} " + " ".join(chans))
        for c in children[j]:
            emit(c, depth + 1)
        if j in document.end_sites:
            ex, ey, ez = document.end_sites[j]
            lines.append(f"{inner}End Site")
            lines.append(f"{inner}{{")
            lines.append(f"{inner}  OFFSET {_fmt(ex)} {_fmt(ey)} {_fmt(ez)}")
            lines.append(f"{inner}}}")
        lines.append(f"{indent}}}")

    emit(0, 0)
    lines.append("MOTION")
    lines.append(f"Frames: {clip.frame_count}")
    lines.append(f"Frame Time: {_fmt(document.frame_time)}")
    for t, frame in enumerate(clip.frames):
        row = []
        for j in range(skel.joint_count):
            chans = document.channel_layout[j]
            order = _rotation_order(chans)
            angles = np.rad2deg(
                matrix_to_euler(axis_angle_to_matrix(frame.rotations[j]), order)
            )
            if j == 0:
                translation = frame.root_translation
            elif j in document.extra_translations:
                translation = document.extra_translations[j][t]
            else:
                translation = np.zeros(3)
            ri = 0
            for c in chans:
                if c in _ROTATION_CHANNELS:
                    row.append(_fmt(angles[ri]))
                    ri += 1
                else:
                    row.append(_fmt(translation["XYZ".index(c[0])]))
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def document_from_clip(skeleton, clip, end_sites=None, rotation_order="ZXY"):
    """Wrap a freshly fitted clip as a writable document.

    The root gets 6 channels (positions first), children 3 rotation channels,
    all with the same rotation order (default ZXY).
    """
    rot_channels = tuple(f"{axis}rotation" for axis in rotation_order.upper())
    if len(rot_channels) != 3:
        raise ValidationError("rotation order must name three axes")
    layout = [_POSITION_CHANNELS + rot_channels]
    layout += [rot_channels] * (skeleton.joint_count - 1)
    return BvhDocument(
        skeleton=skeleton,
        channel_layout=tuple(layout),
        end_sites=dict(end_sites or {}),
        clip=clip,
        frame_time=1.0 / clip.fps,
        extra_translations={},
    )
