"""Canonical interchange document.

A single JSON object carrying skeleton topology, quaternion frames, the
frame time, and an optional label:

    {
      "version": 1,
      "skeleton": [{"name", "parent", "offset": [x,y,z], "has_rotation"}, ...],
      "frame_time": "0.008333333333333333",
      "label": "walk",                       # omitted when the clip has none
      "frames": [{"root": [x,y,z], "quats": [w,x,y,z, ...]}, ...]
    }

``parent`` is the joint's index in the skeleton list, -1 for the root.
``has_rotation`` is true for every joint that carries a pose quaternion and
false for terminal end sites; ``quats`` holds 4 values (w,x,y,z) per
rotating joint in skeleton order. ``frame_time`` is a decimal string so the
value survives formatting-agnostic tooling. All numbers are written with
full precision (shortest exact decimal), so a load/save cycle is bitwise
stable. Channel layout is not part of the schema: loading assigns the
default layout (root translation + ZXY rotation order).
"""

from __future__ import annotations

import hashlib
import json
import math

from ..errors import ParseError
from ..rotations import Rotation
from ..skeleton import Joint, MotionClip, Pose, Skeleton

_ROOT_CHANNELS = ("TX", "TY", "TZ", "RZ", "RX", "RY")
_JOINT_CHANNELS = ("RZ", "RX", "RY")


def skeleton_encoding(skeleton: Skeleton) -> list[dict]:
    """The schema's skeleton array for this skeleton."""
    out = []
    for joint in skeleton.joints:
        out.append(
            {
                "name": joint.name,
                "parent": -1 if joint.parent is None else joint.parent,
                "offset": list(joint.offset),
                "has_rotation": not joint.is_end_site,
            }
        )
    return out


def skeleton_fingerprint(skeleton: Skeleton) -> str:
    """Hex digest identifying the skeleton's canonical encoding."""
    payload = json.dumps(
        skeleton_encoding(skeleton), separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def to_canonical(skeleton: Skeleton, clip: MotionClip) -> str:
    """Serialize a clip to the canonical document."""
    if not skeleton.same_structure(clip.skeleton):
        raise ValueError("clip is bound to a different skeleton")
    doc: dict = {"version": 1, "skeleton": skeleton_encoding(skeleton)}
    doc["frame_time"] = repr(clip.frame_time)
    if clip.label is not None:
        doc["label"] = clip.label
    frames = []
    for i, pose in enumerate(clip.frames):
        if pose.translations:
            raise ValueError(
                f"frame {i} has per-joint translation overrides, which the "
                "canonical format cannot represent"
            )
        quats: list[float] = []
        for rot in pose.rotations:
            quats.extend((rot.w, rot.x, rot.y, rot.z))
        frames.append({"root": list(pose.root_translation), "quats": quats})
    doc["frames"] = frames
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def from_canonical(document: str) -> tuple[Skeleton, MotionClip]:
    """Parse a canonical document; schema errors name the offending field."""
    try:
        obj = json.loads(document, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid object notation: {exc.msg}", line=exc.lineno) from None
    if not isinstance(obj, dict):
        raise ParseError("top level: expected an object")

    version = obj.get("version")
    if not isinstance(version, int) or isinstance(version, bool) or version != 1:
        raise ParseError(f"version: expected 1, got {version!r}")
    allowed = {"version", "skeleton", "frame_time", "label", "frames"}
    for key in obj:
        if key not in allowed:
            raise ParseError(f"{key}: unknown field")

    joints = _decode_skeleton(obj.get("skeleton"))
    try:
        skeleton = Skeleton(tuple(joints), name=joints[0].name)
    except ValueError as exc:
        raise ParseError(f"skeleton: {exc}") from None

    frame_time = _decode_frame_time(obj.get("frame_time"))
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise ParseError("label: expected a string")

    frames = _decode_frames(obj.get("frames"), skeleton)
    try:
        clip = MotionClip(skeleton, frame_time, frames, label=label)
    except ValueError as exc:
        raise ParseError(f"frames: {exc}") from None
    return skeleton, clip


def _reject_constant(token: str):
    raise ParseError(f"non-finite constant {token!r} is not allowed")


def _decode_skeleton(entries) -> list[Joint]:
    if not isinstance(entries, list) or not entries:
        raise ParseError("skeleton: expected a non-empty array")
    joints: list[Joint] = []
    for i, entry in enumerate(entries):
        path = f"skeleton[{i}]"
        if not isinstance(entry, dict):
            raise ParseError(f"{path}: expected an object")
        for key in entry:
            if key not in ("name", "parent", "offset", "has_rotation"):
                raise ParseError(f"{path}.{key}: unknown field")
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise ParseError(f"{path}.name: expected a non-empty string")
        parent = entry.get("parent")
        if not isinstance(parent, int) or isinstance(parent, bool):
            raise ParseError(f"{path}.parent: expected an integer")
        if i == 0:
            if parent != -1:
                raise ParseError(f"{path}.parent: root must use -1")
        elif not 0 <= parent < i:
            raise ParseError(f"{path}.parent: must point at an earlier joint")
        offset = _decode_vec3(entry.get("offset"), f"{path}.offset")
        has_rotation = entry.get("has_rotation")
        if not isinstance(has_rotation, bool):
            raise ParseError(f"{path}.has_rotation: expected a boolean")
        channels: tuple[str, ...] = ()
        if has_rotation:
            channels = _ROOT_CHANNELS if i == 0 else _JOINT_CHANNELS
        try:
            joints.append(
                Joint(
                    name,
                    None if parent == -1 else parent,
                    offset,
                    channels,
                    is_end_site=not has_rotation,
                )
            )
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None
    return joints


def _decode_frame_time(raw) -> float:
    if not isinstance(raw, str):
        raise ParseError("frame_time: expected a decimal string")
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"frame_time: not a number: {raw!r}") from None
    if not math.isfinite(value) or value <= 0:
        raise ParseError(f"frame_time: must be positive and finite, got {raw!r}")
    return value


def _decode_frames(entries, skeleton: Skeleton) -> tuple[Pose, ...]:
    if not isinstance(entries, list):
        raise ParseError("frames: expected an array")
    rotating = len(skeleton.posed_joints)
    poses = []
    for i, entry in enumerate(entries):
        path = f"frames[{i}]"
        if not isinstance(entry, dict):
            raise ParseError(f"{path}: expected an object")
        for key in entry:
            if key not in ("root", "quats"):
                raise ParseError(f"{path}.{key}: unknown field")
        root = _decode_vec3(entry.get("root"), f"{path}.root")
        quats = entry.get("quats")
        if not isinstance(quats, list) or len(quats) != 4 * rotating:
            raise ParseError(
                f"{path}.quats: expected {4 * rotating} values "
                f"(4 per rotating joint), got "
                f"{len(quats) if isinstance(quats, list) else type(quats).__name__}"
            )
        rotations = []
        for j in range(rotating):
            w, x, y, z = (_decode_number(quats[4 * j + k], f"{path}.quats[{4 * j + k}]") for k in range(4))
            try:
                rotations.append(Rotation(w, x, y, z))
            except ValueError as exc:
                raise ParseError(f"{path}.quats[{4 * j}..{4 * j + 3}]: {exc}") from None
        poses.append(Pose(root, tuple(rotations)))
    return tuple(poses)


def _decode_vec3(raw, path: str):
    if not isinstance(raw, list) or len(raw) != 3:
        raise ParseError(f"{path}: expected an array of 3 numbers")
    return tuple(_decode_number(v, f"{path}[{k}]") for k, v in enumerate(raw))


def _decode_number(raw, path: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ParseError(f"{path}: expected a number")
    value = float(raw)
    if not math.isfinite(value):
        raise ParseError(f"{path}: must be finite")
    return value
