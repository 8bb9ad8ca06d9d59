"""BVH (Biovision Hierarchy) reader and writer.

The reader accepts any well-formed BVH document and reports malformed input
as :class:`~motionkit.errors.ParseError` with the offending line number. The
writer normalizes the surface only (2-space indentation, 6-decimal numbers)
and keeps every joint's declared channel list verbatim; a position triple is
prepended just for joints that carry translation data their channels cannot
express. ``parse_bvh(write_bvh(s, c))`` round-trips topology exactly and
channel values within 1e-5.
"""

from __future__ import annotations

from ..errors import ParseError
from ..rotations import Rotation, euler_to_quat, quat_to_euler
from ..skeleton import Joint, MotionClip, Pose, Skeleton

_CHANNEL_NAMES = {
    "Xposition": "TX",
    "Yposition": "TY",
    "Zposition": "TZ",
    "Xrotation": "RX",
    "Yrotation": "RY",
    "Zrotation": "RZ",
}
_CHANNEL_WORDS = {v: k for k, v in _CHANNEL_NAMES.items()}


class _Lines:
    """Token lines with 1-based line numbers; blank lines skipped."""

    def __init__(self, text: str):
        self.items = [
            (n, line.split())
            for n, line in enumerate(text.splitlines(), start=1)
            if line.strip()
        ]
        self.pos = 0

    def peek(self):
        return self.items[self.pos] if self.pos < len(self.items) else (None, None)

    def next(self, expect: str | None = None):
        if self.pos >= len(self.items):
            last = self.items[-1][0] if self.items else 1
            raise ParseError(
                f"unexpected end of document (expected {expect})" if expect else "unexpected end of document",
                line=last,
            )
        item = self.items[self.pos]
        self.pos += 1
        return item


def parse_bvh(text: str) -> tuple[Skeleton, MotionClip]:
    """Parse a complete BVH document into a skeleton and clip."""
    lines = _Lines(text)

    num, tokens = lines.next("HIERARCHY")
    if tokens[0] != "HIERARCHY":
        raise ParseError(f"expected HIERARCHY, got {tokens[0]!r}", line=num)

    joints: list[Joint] = []
    names_taken: set[str] = set()
    stack: list[int] = []
    saw_root = False

    while True:
        num, tokens = lines.peek()
        if tokens is None:
            raise ParseError("missing MOTION section", line=len(text.splitlines()) or 1)
        keyword = tokens[0]

        if keyword == "MOTION":
            lines.next()
            break
        if keyword == "ROOT":
            if saw_root:
                raise ParseError("multiple ROOT joints", line=num)
            saw_root = True
            _parse_joint_block(lines, joints, names_taken, stack, parent=None, end_site=False)
        elif keyword == "JOINT":
            if not stack:
                raise ParseError("JOINT outside of a ROOT block", line=num)
            _parse_joint_block(lines, joints, names_taken, stack, parent=stack[-1], end_site=False)
        elif keyword == "End" and len(tokens) >= 2 and tokens[1] == "Site":
            if not stack:
                raise ParseError("End Site outside of a joint block", line=num)
            _parse_joint_block(lines, joints, names_taken, stack, parent=stack[-1], end_site=True)
        elif keyword == "}":
            lines.next()
            if not stack:
                raise ParseError("unbalanced closing brace", line=num)
            stack.pop()
        else:
            raise ParseError(f"unexpected token {keyword!r} in hierarchy", line=num)

    if not saw_root:
        raise ParseError("document has no ROOT joint", line=num or 1)
    if stack:
        raise ParseError("unbalanced braces: hierarchy block left open", line=num or 1)

    try:
        skeleton = Skeleton(tuple(joints), name=joints[0].name)
    except ValueError as exc:
        raise ParseError(str(exc), line=num or 1) from None

    frame_count, frame_time = _parse_motion_header(lines)
    frames = _parse_motion_rows(lines, skeleton, frame_count)
    clip = MotionClip(skeleton, frame_time, frames)
    return skeleton, clip


def _parse_joint_block(lines, joints, names_taken, stack, parent, end_site):
    num, tokens = lines.next()
    if end_site:
        name = _fresh_name(f"{joints[parent].name}_end", names_taken)
    else:
        if len(tokens) < 2:
            raise ParseError(f"{tokens[0]} needs a name", line=num)
        name = "_".join(tokens[1:])
        if name in names_taken:
            raise ParseError(f"duplicate joint name {name!r}", line=num)
    names_taken.add(name)

    num, tokens = lines.next("{")
    if tokens != ["{"]:
        raise ParseError("expected '{'", line=num)

    num, tokens = lines.next("OFFSET")
    if tokens[0] != "OFFSET" or len(tokens) != 4:
        raise ParseError("expected OFFSET with 3 values", line=num)
    offset = tuple(_number(t, num) for t in tokens[1:])

    channels: tuple[str, ...] = ()
    num2, tokens2 = lines.peek()
    if tokens2 and tokens2[0] == "CHANNELS":
        if end_site:
            raise ParseError("End Site cannot declare CHANNELS", line=num2)
        lines.next()
        declared = int(_number(tokens2[1], num2)) if len(tokens2) >= 2 else None
        if declared is None or declared != len(tokens2) - 2:
            raise ParseError("CHANNELS count does not match listed channels", line=num2)
        try:
            channels = tuple(_CHANNEL_NAMES[t] for t in tokens2[2:])
        except KeyError as exc:
            raise ParseError(f"unknown channel name {exc.args[0]!r}", line=num2) from None
    elif not end_site:
        raise ParseError("joint missing CHANNELS declaration", line=num2 or num)

    idx = len(joints)
    try:
        joints.append(Joint(name, parent, offset, channels, is_end_site=end_site))
    except ValueError as exc:
        raise ParseError(str(exc), line=num) from None

    if end_site:
        num, tokens = lines.next("}")
        if tokens != ["}"]:
            raise ParseError("End Site may only contain OFFSET", line=num)
    else:
        stack.append(idx)


def _fresh_name(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    n = 2
    while f"{base}{n}" in taken:
        n += 1
    return f"{base}{n}"


def _parse_motion_header(lines) -> tuple[int, float]:
    num, tokens = lines.next("Frames:")
    if tokens[0] != "Frames:" or len(tokens) != 2:
        raise ParseError("expected 'Frames: <count>'", line=num)
    frame_count = int(_number(tokens[1], num))
    if frame_count < 0:
        raise ParseError("frame count cannot be negative", line=num)

    num, tokens = lines.next("Frame Time:")
    if tokens[:2] != ["Frame", "Time:"] or len(tokens) != 3:
        raise ParseError("expected 'Frame Time: <seconds>'", line=num)
    frame_time = _number(tokens[2], num)
    if not frame_time > 0:
        raise ParseError(f"frame time must be positive, got {frame_time}", line=num)
    return frame_count, frame_time


def _parse_motion_rows(lines, skeleton: Skeleton, frame_count: int) -> tuple[Pose, ...]:
    expected = skeleton.channel_count
    frames = []
    for _ in range(frame_count):
        num, tokens = lines.peek()
        if tokens is None:
            raise ParseError(
                f"expected {frame_count} motion rows, got {len(frames)}",
                line=lines.items[-1][0] if lines.items else 1,
            )
        lines.next()
        if len(tokens) != expected:
            raise ParseError(
                f"motion row has {len(tokens)} values, skeleton has {expected} channels",
                line=num,
            )
        values = [_number(t, num) for t in tokens]
        frames.append(_row_to_pose(skeleton, values))
    num, tokens = lines.peek()
    if tokens is not None:
        raise ParseError("extra content after the declared motion rows", line=num)
    return tuple(frames)


def _row_to_pose(skeleton: Skeleton, values: list[float]) -> Pose:
    slots = skeleton.rotation_slot
    rotations: list[Rotation | None] = [None] * len(skeleton.posed_joints)
    root_translation = (0.0, 0.0, 0.0)
    translations: dict[int, tuple[float, float, float]] = {}
    cursor = 0
    for idx, joint in enumerate(skeleton.joints):
        if not joint.channels:
            if not joint.is_end_site:
                rotations[slots[idx]] = Rotation.identity()
            continue
        tvec = [0.0, 0.0, 0.0]
        has_t = False
        angles = []
        for ch in joint.channels:
            v = values[cursor]
            cursor += 1
            if ch.startswith("T"):
                tvec["XYZ".index(ch[1])] = v
                has_t = True
            else:
                angles.append(v)
        if has_t:
            if joint.parent is None:
                root_translation = tuple(tvec)
            else:
                translations[idx] = tuple(tvec)
        order = joint.rotation_order
        if order is not None:
            rotations[slots[idx]] = euler_to_quat(angles, order)
        elif not joint.is_end_site:
            rotations[slots[idx]] = Rotation.identity()
    return Pose(root_translation, tuple(rotations), translations)


def _number(token: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"expected a number, got {token!r}", line=line) from None
    if value != value or value in (float("inf"), float("-inf")):
        raise ParseError(f"non-finite number {token!r}", line=line)
    return value


# --- writing ---------------------------------------------------------------


def write_bvh(skeleton: Skeleton, clip: MotionClip) -> str:
    """Serialize to the BVH layout described in the module docstring."""
    if clip.skeleton is not skeleton and not skeleton.same_structure(clip.skeleton):
        raise ValueError("clip is bound to a different skeleton")

    specs = _written_channels(skeleton, clip)
    out: list[str] = ["HIERARCHY"]
    _write_joint(out, skeleton, 0, depth=0, specs=specs)
    out.append("MOTION")
    out.append(f"Frames: {len(clip.frames)}")
    out.append(f"Frame Time: {clip.frame_time:.6f}")
    slots = skeleton.rotation_slot
    for pose in clip.frames:
        row: list[str] = []
        for idx, joint in enumerate(skeleton.joints):
            spec = specs.get(idx)
            if not spec:
                continue
            tvec = pose.root_translation if idx == 0 else pose.translations.get(idx, (0.0, 0.0, 0.0))
            if joint.rotation_order is not None:
                angles = quat_to_euler(pose.rotations[slots[idx]], joint.rotation_order)
                angle = dict(zip(joint.rotation_order, angles))
            else:
                angle = {}
            for ch in spec:
                value = tvec["XYZ".index(ch[1])] if ch[0] == "T" else angle[ch[1]]
                row.append(f"{value:.6f}")
        out.append(" ".join(row))
    return "\n".join(out) + "\n"


def _written_channels(skeleton: Skeleton, clip: MotionClip) -> dict[int, tuple[str, ...]]:
    """Channel codes each joint writes, keyed by joint index.

    Declared channels pass through untouched; channel-less rigid joints keep
    CHANNELS 0 so topology round-trips. A joint whose pose data moves (root
    translation, or a per-joint override) but whose channels cannot say so
    gets a position triple prepended, trading exact topology for the data.
    """
    moved = {idx for pose in clip.frames for idx in pose.translations}
    if any(c != 0.0 for pose in clip.frames for c in pose.root_translation):
        moved.add(0)
    specs: dict[int, tuple[str, ...]] = {}
    for idx, joint in enumerate(skeleton.joints):
        if joint.is_end_site:
            continue
        channels = joint.channels
        if idx in moved and not any(ch[0] == "T" for ch in channels):
            channels = ("TX", "TY", "TZ") + channels
        specs[idx] = channels
    return specs


def _write_joint(out: list[str], skeleton: Skeleton, idx: int, depth: int, specs: dict[int, tuple[str, ...]]) -> None:
    joint = skeleton.joints[idx]
    pad = "  " * depth
    if joint.is_end_site:
        out.append(f"{pad}End Site")
        out.append(f"{pad}{{")
        out.append(f"{pad}  OFFSET {joint.offset[0]:.6f} {joint.offset[1]:.6f} {joint.offset[2]:.6f}")
        out.append(f"{pad}}}")
        return

    keyword = "ROOT" if joint.parent is None else "JOINT"
    out.append(f"{pad}{keyword} {joint.name}")
    out.append(f"{pad}{{")
    out.append(f"{pad}  OFFSET {joint.offset[0]:.6f} {joint.offset[1]:.6f} {joint.offset[2]:.6f}")

    words = [_CHANNEL_WORDS[ch] for ch in specs[idx]]
    out.append(f"{pad}  CHANNELS {len(words)}" + ("".join(f" {w}" for w in words)))

    for child in skeleton.children[idx]:
        _write_joint(out, skeleton, child, depth + 1, specs=specs)
    out.append(f"{pad}}}")
