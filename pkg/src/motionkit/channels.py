"""Flat channel-matrix view of motion data.

Models and dataset tooling work on a (frames x channels) float matrix: the
concatenation, joint by joint in skeleton order, of each joint's channel
values. Rotation channels hold intrinsic Euler degrees in the joint's own
channel order; translation channels hold length units. This is the same
value layout a BVH motion row uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rotations import Rotation, euler_to_quat, quat_to_euler
from .skeleton import MotionClip, Pose, Skeleton


def channel_layout(skeleton: Skeleton) -> list[tuple[int, str]]:
    """(joint index, channel code) per matrix column."""
    return [(idx, ch) for idx, joint in enumerate(skeleton.joints) for ch in joint.channels]


def rotation_channel_mask(skeleton: Skeleton) -> np.ndarray:
    """Boolean mask over columns, True where the column is a rotation angle."""
    return np.array([code.startswith("R") for _, code in channel_layout(skeleton)], dtype=bool)


@dataclass(frozen=True)
class ChannelMatrix:
    """Validated (frames x channel_count) matrix bound to a skeleton."""

    skeleton: Skeleton
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"channel matrix must be 2-D, got shape {values.shape}")
        if values.shape[1] != self.skeleton.channel_count:
            raise ValueError(
                f"matrix has {values.shape[1]} columns, skeleton has {self.skeleton.channel_count} channels"
            )
        if values.size and not np.all(np.isfinite(values)):
            raise ValueError("channel matrix contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @staticmethod
    def from_clip(clip: MotionClip) -> "ChannelMatrix":
        return ChannelMatrix(clip.skeleton, clip_to_matrix(clip))

    def to_clip(self, frame_time: float, label: str | None = None) -> MotionClip:
        return matrix_to_clip(self.skeleton, self.values, frame_time, label)


def clip_to_matrix(clip: MotionClip) -> np.ndarray:
    """Flatten a clip's poses to raw channel values (degrees / length units)."""
    skeleton = clip.skeleton
    slots = skeleton.rotation_slot
    out = np.zeros((len(clip.frames), skeleton.channel_count), dtype=np.float64)
    for row, pose in enumerate(clip.frames):
        col = 0
        for idx, joint in enumerate(skeleton.joints):
            if not joint.channels:
                continue
            order = joint.rotation_order
            angles = None
            if order is not None:
                angles = quat_to_euler(pose.rotations[slots[idx]], order)
            rot_cursor = 0
            for ch in joint.channels:
                if ch.startswith("T"):
                    vec = pose.root_translation if joint.parent is None else pose.translations.get(idx, (0.0, 0.0, 0.0))
                    out[row, col] = vec["XYZ".index(ch[1])]
                else:
                    out[row, col] = angles[rot_cursor]
                    rot_cursor += 1
                col += 1
    return out


def matrix_to_clip(
    skeleton: Skeleton,
    values: np.ndarray,
    frame_time: float,
    label: str | None = None,
) -> MotionClip:
    """Rebuild a clip from raw channel values.

    Rotation triples are re-encoded as unit quaternions via the joint's own
    channel order; angles outside (-180, 180] are fine (they wrap).
    """
    matrix = ChannelMatrix(skeleton, values).values
    slots = skeleton.rotation_slot
    identity_needed = [idx for idx in skeleton.posed_joints if skeleton.joints[idx].rotation_order is None]
    frames = []
    for row in range(matrix.shape[0]):
        root_translation = (0.0, 0.0, 0.0)
        rotations: list = [None] * len(skeleton.posed_joints)
        translations: dict[int, tuple[float, float, float]] = {}
        col = 0
        for idx, joint in enumerate(skeleton.joints):
            if not joint.channels:
                continue
            tvec = [0.0, 0.0, 0.0]
            has_t = False
            angles = []
            rot_order = joint.rotation_order
            for ch in joint.channels:
                v = float(matrix[row, col])
                if ch.startswith("T"):
                    tvec["XYZ".index(ch[1])] = v
                    has_t = True
                else:
                    angles.append(v)
                col += 1
            if has_t:
                if joint.parent is None:
                    root_translation = tuple(tvec)
                else:
                    translations[idx] = tuple(tvec)
            if rot_order is not None:
                rotations[slots[idx]] = euler_to_quat(angles, rot_order)
        for idx in identity_needed:
            rotations[slots[idx]] = Rotation.identity()
        frames.append(Pose(root_translation, tuple(rotations), translations))
    return MotionClip(skeleton, frame_time, tuple(frames), label)


def unwrap_rotation_channels(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Remove +/-180 degree seam jumps along time for rotation columns.

    Returns a copy; linear models need angle continuity, and unwrapping a
    whole clip before windowing keeps all its windows on one branch.
    """
    out = np.array(values, dtype=np.float64, copy=True)
    if out.shape[0] > 1 and mask.any():
        out[:, mask] = np.unwrap(out[:, mask], axis=0, period=360.0)
    return out
