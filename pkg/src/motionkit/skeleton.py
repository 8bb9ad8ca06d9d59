"""Skeleton, pose and clip data model plus forward kinematics.

A skeleton is a flat, topologically ordered list of joints (parents before
children, root at index 0). Channels use the codes TX/TY/TZ/RX/RY/RZ; a
joint's rotation order is simply the order its R-channels are listed in, so
BVH channel semantics carry through unchanged.

All types here are immutable values; every operation is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

from .rotations import Rotation, quat_mul

TRANSLATION_CHANNELS = ("TX", "TY", "TZ")
ROTATION_CHANNELS = ("RX", "RY", "RZ")
CHANNEL_CODES = TRANSLATION_CHANNELS + ROTATION_CHANNELS

Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class Joint:
    """One node of the hierarchy.

    ``parent`` is an index into the skeleton's joint list (None only for the
    root) and must be smaller than the joint's own index. End sites carry no
    channels and no animated rotation; they exist so bone chains have tips.
    """

    name: str
    parent: int | None
    offset: Vec3
    channels: tuple[str, ...] = ()
    is_end_site: bool = False

    def __post_init__(self):
        object.__setattr__(self, "offset", tuple(float(c) for c in self.offset))
        object.__setattr__(self, "channels", tuple(self.channels))
        if len(self.offset) != 3 or not all(math.isfinite(c) for c in self.offset):
            raise ValueError(f"joint {self.name!r}: offset must be 3 finite values")
        seen = set()
        for ch in self.channels:
            if ch not in CHANNEL_CODES:
                raise ValueError(f"joint {self.name!r}: unknown channel {ch!r}")
            if ch in seen:
                raise ValueError(f"joint {self.name!r}: duplicate channel {ch!r}")
            seen.add(ch)
        n_rot = sum(1 for ch in self.channels if ch in ROTATION_CHANNELS)
        if n_rot not in (0, 3):
            raise ValueError(f"joint {self.name!r}: rotation channels must number 0 or 3, got {n_rot}")
        if self.is_end_site and self.channels:
            raise ValueError(f"end site {self.name!r} must have no channels")

    @property
    def rotation_order(self) -> str | None:
        """Intrinsic Euler order of this joint's rotation channels, or None."""
        order = "".join(ch[1] for ch in self.channels if ch in ROTATION_CHANNELS)
        return order or None


@dataclass(frozen=True)
class Skeleton:
    joints: tuple[Joint, ...]
    name: str = "skeleton"

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        if not self.joints:
            raise ValueError("skeleton needs at least one joint")
        names = set()
        for idx, joint in enumerate(self.joints):
            if joint.name in names:
                raise ValueError(f"duplicate joint name {joint.name!r}")
            names.add(joint.name)
            if idx == 0:
                if joint.parent is not None:
                    raise ValueError("joint 0 must be the root (no parent)")
                if joint.is_end_site:
                    raise ValueError("root joint cannot be an end site")
            else:
                if joint.parent is None:
                    raise ValueError(f"joint {joint.name!r}: only the root may lack a parent")
                if not 0 <= joint.parent < idx:
                    raise ValueError(f"joint {joint.name!r}: parent index {joint.parent} breaks topological order")
                if self.joints[joint.parent].is_end_site:
                    raise ValueError(f"joint {joint.name!r}: parent is an end site")

    def __len__(self) -> int:
        return len(self.joints)

    @cached_property
    def channel_count(self) -> int:
        return sum(len(j.channels) for j in self.joints)

    @cached_property
    def posed_joints(self) -> tuple[int, ...]:
        """Indices of joints that carry an animated rotation (non end sites)."""
        return tuple(i for i, j in enumerate(self.joints) if not j.is_end_site)

    @cached_property
    def rotation_slot(self) -> dict[int, int]:
        """Maps joint index to its slot in ``Pose.rotations``."""
        return {joint_idx: slot for slot, joint_idx in enumerate(self.posed_joints)}

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.joints]
        for idx, joint in enumerate(self.joints):
            if joint.parent is not None:
                kids[joint.parent].append(idx)
        return tuple(tuple(k) for k in kids)

    def index_of(self, joint_name: str) -> int:
        for idx, joint in enumerate(self.joints):
            if joint.name == joint_name:
                return idx
        raise KeyError(joint_name)

    def same_structure(self, other: "Skeleton") -> bool:
        """True when names, parentage, channels and end-site flags all match."""
        if len(self.joints) != len(other.joints):
            return False
        return all(
            a.name == b.name
            and a.parent == b.parent
            and a.channels == b.channels
            and a.is_end_site == b.is_end_site
            for a, b in zip(self.joints, other.joints)
        )

    def validate_pose(self, pose: "Pose") -> None:
        if len(pose.rotations) != len(self.posed_joints):
            raise ValueError(
                f"pose has {len(pose.rotations)} rotations, skeleton expects {len(self.posed_joints)}"
            )
        for idx in pose.translations:
            if not 0 < idx < len(self.joints):
                raise ValueError(f"pose translation override for invalid joint index {idx}")
            if self.joints[idx].is_end_site:
                raise ValueError(f"pose translation override targets end site {self.joints[idx].name!r}")


@dataclass(frozen=True)
class Pose:
    """One frame: root translation plus a rotation per non-end-site joint.

    ``translations`` holds rare per-joint translation overrides (joint index
    to vector) for skeletons whose non-root joints have TX/TY/TZ channels.
    """

    root_translation: Vec3
    rotations: tuple[Rotation, ...]
    translations: dict[int, Vec3] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "root_translation", tuple(float(c) for c in self.root_translation))
        object.__setattr__(self, "rotations", tuple(self.rotations))
        if len(self.root_translation) != 3:
            raise ValueError("root_translation must have 3 components")


@dataclass(frozen=True)
class MotionClip:
    """A timed pose sequence bound to one skeleton."""

    skeleton: Skeleton
    frame_time: float
    frames: tuple[Pose, ...]
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not (self.frame_time > 0.0 and math.isfinite(self.frame_time)):
            raise ValueError(f"frame_time must be positive, got {self.frame_time!r}")
        if self.frames and self.skeleton.channel_count == 0:
            raise ValueError("skeleton with zero channels cannot carry motion data")
        for i, frame in enumerate(self.frames):
            try:
                self.skeleton.validate_pose(frame)
            except ValueError as exc:
                raise ValueError(f"frame {i}: {exc}") from None

    @property
    def fps(self) -> float:
        return 1.0 / self.frame_time

    def __len__(self) -> int:
        return len(self.frames)


def forward_kinematics(skeleton: Skeleton, pose: Pose) -> list[tuple[Vec3, Rotation]]:
    """Global (position, rotation) per joint, end sites included.

    Root: position = root_translation + root offset, rotation = the root's
    local rotation. Child j of parent k: rotation = global(k) * local(j),
    position = global_pos(k) + global_rot(k) applied to (offset(j) plus any
    per-joint translation override). End sites inherit the parent rotation.
    """
    skeleton.validate_pose(pose)
    slots = skeleton.rotation_slot
    out: list[tuple[Vec3, Rotation]] = []
    for idx, joint in enumerate(skeleton.joints):
        if joint.parent is None:
            rot = pose.rotations[slots[idx]]
            tr = pose.root_translation
            pos = (tr[0] + joint.offset[0], tr[1] + joint.offset[1], tr[2] + joint.offset[2])
        else:
            parent_pos, parent_rot = out[joint.parent]
            extra = pose.translations.get(idx)
            off = joint.offset
            if extra is not None:
                off = (off[0] + extra[0], off[1] + extra[1], off[2] + extra[2])
            dx, dy, dz = parent_rot.apply(off)
            pos = (parent_pos[0] + dx, parent_pos[1] + dy, parent_pos[2] + dz)
            if joint.is_end_site:
                rot = parent_rot
            else:
                rot = quat_mul(parent_rot, pose.rotations[slots[idx]])
        out.append((pos, rot))
    return out
