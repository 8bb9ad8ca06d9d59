"""Deterministic fixture generators shared across test modules.

Structure randomness (tree shapes, names, counts) uses ``random.Random``
with caller-fixed seeds; value streams that must be platform-identical use
the package's splitmix64. Generators that feed the BVH writer only emit
what the normalized layout can represent exactly: root channels
TX TY TZ RZ RX RY, ZXY rotation triples elsewhere, end sites named
``<parent>_end``, all values rounded to 6 decimals, middle Euler angle
kept well away from +/-90.
"""

from __future__ import annotations

import math
import random
from pathlib import Path

import numpy as np

from motionkit import Joint, MotionClip, Pose, Skeleton, euler_to_quat, write_bvh
from motionkit.channels import matrix_to_clip
from motionkit.rng import SplitMix64

ROOT_CHANNELS = ("TX", "TY", "TZ", "RZ", "RX", "RY")
ZXY = ("RZ", "RX", "RY")

_WORDS = (
    "hips", "spine", "chest", "neck", "head", "clavicle", "shoulder",
    "elbow", "wrist", "hand", "thumb", "hip", "knee", "ankle", "foot",
    "toe", "tail", "jaw", "brow", "finger",
)


def _name_pool() -> list[str]:
    pool = list(_WORDS)
    pool += [f"{w}_{i}" for i in range(1, 6) for w in _WORDS]
    return pool


def writer_style_skeleton(rnd: random.Random, max_joints: int = 30) -> Skeleton:
    """Random tree the BVH writer round-trips without renaming anything.

    Joint order is depth first: file nesting pins that ordering, so only a
    DFS-ordered list can come back from the parser index-identical.
    """
    total = rnd.randint(2, max_joints)
    names = _name_pool()
    rnd.shuffle(names)

    def offset():
        return tuple(round(rnd.uniform(-5.0, 5.0), 6) for _ in range(3))

    # grow the shape first: (name, channels, end flag) plus child lists
    nodes = [(names.pop(), ROOT_CHANNELS, False)]
    kids: list[list[int]] = [[]]
    open_parents = [0]  # non-end joints that may still take children
    while len(nodes) < total:
        parent = rnd.choice(open_parents)
        # end sites close a branch; cap their share so trees keep growing
        if rnd.random() < 0.25 and not any(nodes[c][2] for c in kids[parent]):
            nodes.append((f"{nodes[parent][0]}_end", (), True))
        else:
            nodes.append((names.pop(), ZXY, False))
            open_parents.append(len(nodes) - 1)
        kids[parent].append(len(nodes) - 1)
        kids.append([])

    joints: list[Joint] = []

    def emit(node: int, parent_idx: int | None) -> None:
        name, channels, end = nodes[node]
        idx = len(joints)
        joints.append(Joint(name, parent_idx, offset(), channels, is_end_site=end))
        for child in kids[node]:
            emit(child, idx)

    emit(0, None)
    return Skeleton(tuple(joints), name=joints[0].name)


def writer_style_clip(rnd: random.Random, skeleton: Skeleton, max_frames: int = 120) -> MotionClip:
    n_frames = rnd.randint(1, max_frames)
    frame_time = rnd.choice((1.0 / 24.0, 1.0 / 30.0, 1.0 / 60.0, 1.0 / 120.0))
    frames = []
    for _ in range(n_frames):
        rotations = []
        for idx in skeleton.posed_joints:
            z = round(rnd.uniform(-150.0, 150.0), 6)
            x = round(rnd.uniform(-85.0, 85.0), 6)
            y = round(rnd.uniform(-150.0, 150.0), 6)
            rotations.append(euler_to_quat((z, x, y), "ZXY"))
        root = tuple(round(rnd.uniform(-10.0, 10.0), 6) for _ in range(3))
        frames.append(Pose(root, tuple(rotations)))
    return MotionClip(skeleton, frame_time, tuple(frames))


def any_order_skeleton(rnd: random.Random, max_joints: int = 20) -> Skeleton:
    """Random tree with arbitrary rotation orders and occasional rigid joints.

    Exercises FK fully; not guaranteed to survive the normalizing writer.
    """
    total = rnd.randint(2, max_joints)
    names = _name_pool()
    rnd.shuffle(names)
    orders = ("XYZ", "XZY", "YXZ", "YZX", "ZXY", "ZYX")

    def offset():
        return tuple(rnd.uniform(-3.0, 3.0) for _ in range(3))

    def rot_channels():
        return tuple("R" + c for c in rnd.choice(orders))

    root_channels = ("TX", "TY", "TZ") + rot_channels() if rnd.random() < 0.9 else rot_channels()
    joints = [Joint(names.pop(), None, offset(), root_channels)]
    open_parents = [0]
    while len(joints) < total:
        parent = rnd.choice(open_parents)
        roll = rnd.random()
        idx = len(joints)
        if roll < 0.15:
            joints.append(Joint(names.pop(), parent, offset(), (), is_end_site=True))
        elif roll < 0.25:
            joints.append(Joint(names.pop(), parent, offset(), ()))  # rigid
            open_parents.append(idx)
        else:
            joints.append(Joint(names.pop(), parent, offset(), rot_channels()))
            open_parents.append(idx)
    return Skeleton(tuple(joints), name=joints[0].name)


def random_pose(rnd: random.Random, skeleton: Skeleton):
    """Pose plus the raw angle/override data an FK oracle consumes."""
    angles_by_joint: dict[int, tuple[float, float, float]] = {}
    rotations = []
    for idx in skeleton.posed_joints:
        order = skeleton.joints[idx].rotation_order
        if order is None:
            rotations.append(euler_to_quat((0.0, 0.0, 0.0), "XYZ"))
            continue
        angles = tuple(rnd.uniform(-180.0, 180.0) for _ in range(3))
        angles_by_joint[idx] = angles
        rotations.append(euler_to_quat(angles, order))
    overrides: dict[int, tuple[float, float, float]] = {}
    for idx, joint in enumerate(skeleton.joints):
        if joint.parent is not None and not joint.is_end_site and rnd.random() < 0.1:
            overrides[idx] = tuple(rnd.uniform(-1.0, 1.0) for _ in range(3))
    root = tuple(rnd.uniform(-10.0, 10.0) for _ in range(3))
    pose = Pose(root, tuple(rotations), dict(overrides))
    return pose, root, angles_by_joint, overrides


# --- synthetic labeled dynamics ----------------------------------------------

SYNTH_SKELETON = Skeleton(
    (
        Joint("hips", None, (0.0, 0.0, 0.0), ROOT_CHANNELS),
        Joint("spine", 0, (0.0, 1.1, 0.0), ZXY),
        Joint("head", 1, (0.0, 0.6, 0.0), ZXY),
        Joint("head_end", 2, (0.0, 0.25, 0.0), (), True),
    ),
    name="hips",
)


def synth_matrix(kind: str, phase: float, frames: int, noise: float, rng: SplitMix64,
                 channel_count: int = 12) -> np.ndarray:
    """One clip of per-channel dynamics: 'walk' sinusoids or 'reach' ramps."""
    t = np.arange(frames, dtype=float)
    out = np.zeros((frames, channel_count))
    for c in range(channel_count):
        if kind == "walk":
            amp = 8.0 + 1.5 * (c % 5)
            out[:, c] = amp * np.sin(0.45 * t + phase + 0.7 * c)
        elif kind == "reach":
            slope = 0.15 + 0.04 * (c % 5)
            out[:, c] = slope * t + 3.0 * math.sin(phase + c)
        else:
            raise ValueError(kind)
        if noise:
            out[:, c] += noise * np.fromiter(
                (rng.next_gaussian() for _ in range(frames)), dtype=float, count=frames
            )
    return out


def synth_clip(kind: str, phase: float, frames: int, noise: float, rng: SplitMix64,
               label: str | None = None, frame_time: float = 1.0 / 30.0) -> MotionClip:
    values = synth_matrix(kind, phase, frames, noise, rng)
    return matrix_to_clip(SYNTH_SKELETON, values, frame_time, label=label)


def write_synth_dataset(root: Path, clips_per_label: int = 6, frames: int = 90,
                        noise: float = 0.4, seed: int = 2024) -> Path:
    """On-disk two-label BVH dataset under walk/ and reach/ subdirectories."""
    rng = SplitMix64(seed)
    for kind in ("walk", "reach"):
        sub = root / kind
        sub.mkdir(parents=True, exist_ok=True)
        for k in range(clips_per_label):
            clip = synth_clip(kind, 0.9 * k, frames, noise, rng)
            (sub / f"{kind}_{k:02d}.bvh").write_text(
                write_bvh(SYNTH_SKELETON, clip), encoding="utf-8"
            )
    return root


def write_config(path: Path, **fields) -> Path:
    """Tiny TOML writer sufficient for dataset descriptors."""
    lines = []
    tables = {}
    for key, value in fields.items():
        if isinstance(value, dict):
            tables[key] = value
            continue
        lines.append(f"{key} = {_toml_value(value)}")
    for name, table in tables.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in table.items())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return '"' + str(value).replace("\\", "\\\\").replace('"', '\\"') + '"'
