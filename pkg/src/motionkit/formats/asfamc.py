"""Acclaim ASF/AMC reader pair.

An ASF document defines the skeleton (``:root``, ``:bonedata``,
``:hierarchy``); the matching AMC document carries per-frame values for each
bone's degrees of freedom. ``parse_asf`` builds a Skeleton whose joint
offsets are the parent bone's ``direction * length`` (root offset zero) and
keeps the AsfBone records needed to decode motion; ``parse_amc`` decodes a
motion file against them.

Angle-composition convention: a list of per-axis rotations is applied
first-listed innermost, so dof order ``rx ry rz`` with angles (a, b, c)
yields the matrix product Rz(c) Ry(b) Rx(a). A bone's local rotation in a
frame is ``C * R * C^-1`` with C the bone's axis rotation under the same
convention. The root line of an AMC file is decoded against the root
joint's channel tuple (kept verbatim from the ASF ``order`` line) with
C = identity; root axis lines carrying nonzero angles are rejected rather
than silently misread.

Joint-limit and documentation fields are parsed and discarded. ``:units
angle`` is respected (degrees by default); length units are kept as written.
Leaf bones get an end site at ``direction * length`` from their joint so the
bone tip survives conversion to other formats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ParseError
from ..rotations import Rotation, axis_rotation, quat_mul
from ..skeleton import Joint, MotionClip, Pose, Skeleton, Vec3

_DOF_NAMES = ("rx", "ry", "rz", "tx", "ty", "tz")
_CHANNEL_FOR_DOF = {"rx": "RX", "ry": "RY", "rz": "RZ", "tx": "TX", "ty": "TY", "tz": "TZ"}


@dataclass(frozen=True)
class AsfBone:
    """One ``:bonedata`` entry, retained for AMC decoding.

    ``axis_angles`` are degrees; ``dof`` preserves the file's order, which
    is also the per-frame value order in AMC.
    """

    name: str
    direction: Vec3
    length: float
    axis_angles: Vec3
    axis_order: str
    dof: tuple[str, ...]

    def __post_init__(self):
        norm = math.sqrt(sum(c * c for c in self.direction))
        if self.direction == (0.0, 0.0, 0.0) and self.length == 0.0:
            pass  # dummy bone, carries no geometry
        elif abs(norm - 1.0) > 1e-6:
            raise ValueError(f"bone {self.name!r}: direction must be unit length")
        seen = set()
        for d in self.dof:
            if d not in _DOF_NAMES:
                raise ValueError(f"bone {self.name!r}: unknown dof {d!r}")
            if d in seen:
                raise ValueError(f"bone {self.name!r}: duplicate dof {d!r}")
            seen.add(d)

    def axis_quat(self) -> Rotation:
        """The bone's local-frame rotation C."""
        pairs = list(zip(self.axis_order, self.axis_angles))
        return _compose_listed_first(pairs)


def _compose_listed_first(pairs) -> Rotation:
    """Compose (axis_letter, degrees) pairs with the first applied innermost."""
    q = Rotation.identity()
    for axis, angle in pairs:
        q = quat_mul(axis_rotation(axis, angle), q)
    return q


def parse_asf(text: str) -> tuple[Skeleton, list[AsfBone]]:
    """Parse an Acclaim skeleton file."""
    sections = _split_sections(text)
    for required in ("root", "bonedata", "hierarchy"):
        if required not in sections:
            raise ParseError(f"missing :{required} section", line=_last_line(text))
    angle_scale = _angle_scale(sections)

    root_channels, root_line = _parse_root(sections["root"], angle_scale)
    bones = _parse_bonedata(sections["bonedata"], angle_scale)
    bone_map = {b.name: b for b in bones}
    children = _parse_hierarchy(sections["hierarchy"], bone_map)

    joints: list[Joint] = [Joint("root", None, (0.0, 0.0, 0.0), root_channels)]
    index_of = {"root": 0}
    stack = [("root", name) for name in reversed(children.get("root", []))]
    placed = {"root"}
    while stack:
        parent_name, name = stack.pop()
        bone = bone_map[name]
        parent_bone = bone_map.get(parent_name)
        if parent_bone is None:  # parent is the root
            offset = (0.0, 0.0, 0.0)
        else:
            offset = tuple(d * parent_bone.length for d in parent_bone.direction)
        channels = ()
        if any(d.startswith("t") for d in bone.dof):
            channels += ("TX", "TY", "TZ")
        if any(d.startswith("r") for d in bone.dof):
            channels += ("RZ", "RX", "RY")
        idx = len(joints)
        try:
            joints.append(Joint(name, index_of[parent_name], offset, channels))
        except ValueError as exc:
            raise ParseError(str(exc), line=root_line) from None
        index_of[name] = idx
        placed.add(name)
        kids = children.get(name, [])
        if kids:
            stack.extend((name, kid) for kid in reversed(kids))
        else:
            tip = tuple(d * bone.length for d in bone.direction)
            joints.append(Joint(f"{name}_end", idx, tip, (), is_end_site=True))

    unplaced = [b.name for b in bones if b.name not in placed]
    if unplaced:
        raise ParseError(
            f"bones not reachable from root in :hierarchy: {', '.join(unplaced)}",
            line=root_line,
        )
    try:
        skeleton = Skeleton(tuple(joints), name="root")
    except ValueError as exc:
        raise ParseError(str(exc), line=root_line) from None
    return skeleton, bones


def _split_sections(text: str):
    """Map section name -> list of (line_number, tokens). Comments stripped."""
    sections: dict[str, list[tuple[int, list[str]]]] = {}
    current: list[tuple[int, list[str]]] | None = None
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith(":"):
            tokens = line[1:].split()
            if not tokens:
                raise ParseError("empty section header", line=num)
            name = tokens[0].lower()
            current = sections.setdefault(name, [])
            if tokens[1:]:
                current.append((num, tokens[1:]))
            continue
        if current is None:
            raise ParseError("content before the first section header", line=num)
        current.append((num, line.split()))
    return sections


def _angle_scale(sections) -> float:
    """Degrees per file angle unit."""
    for num, tokens in sections.get("units", []):
        if tokens[0] == "angle" and len(tokens) >= 2:
            unit = tokens[1].lower()
            if unit == "deg":
                return 1.0
            if unit == "rad":
                return 180.0 / math.pi
            raise ParseError(f"unknown angle unit {unit!r}", line=num)
    return 1.0


def _parse_root(body, angle_scale: float):
    channels: tuple[str, ...] = ()
    first_line = body[0][0] if body else 1
    for num, tokens in body:
        key = tokens[0].lower()
        if key == "order":
            try:
                channels = tuple(_CHANNEL_FOR_DOF[t.lower()] for t in tokens[1:])
            except KeyError as exc:
                raise ParseError(f"unknown root dof {exc.args[0]!r}", line=num) from None
        elif key == "axis":
            angles = [ _float(t, num) * angle_scale for t in tokens[1:] if _is_number(t) ]
            if any(abs(a) > 1e-12 for a in angles):
                raise ParseError("root axis with nonzero angles is not supported", line=num)
        # position / orientation are rest-pose data; parsed and discarded
    return channels, first_line


def _parse_bonedata(body, angle_scale: float) -> list[AsfBone]:
    bones: list[AsfBone] = []
    fields: dict | None = None
    names = set()
    for num, tokens in body:
        key = tokens[0].lower()
        if key == "begin":
            if fields is not None:
                raise ParseError("nested begin in :bonedata", line=num)
            fields = {"line": num}
        elif key == "end":
            if fields is None:
                raise ParseError("end without begin in :bonedata", line=num)
            bones.append(_finish_bone(fields, angle_scale))
            if bones[-1].name in names:
                raise ParseError(f"duplicate bone {bones[-1].name!r}", line=num)
            names.add(bones[-1].name)
            fields = None
        elif fields is None:
            raise ParseError(f"{key!r} outside begin/end in :bonedata", line=num)
        elif key == "name":
            if len(tokens) != 2:
                raise ParseError("bone name must be a single token", line=num)
            fields["name"] = tokens[1]
        elif key == "direction":
            fields["direction"] = _vec3(tokens[1:], num)
        elif key == "length":
            fields["length"] = _float(tokens[1], num) if len(tokens) == 2 else _bad(num, "length needs one value")
        elif key == "axis":
            if len(tokens) < 4:
                raise ParseError("axis needs three angles", line=num)
            fields["axis_angles"] = _vec3(tokens[1:4], num)
            fields["axis_order"] = tokens[4].upper() if len(tokens) > 4 else "XYZ"
            fields["axis_line"] = num
        elif key == "dof":
            fields["dof"] = tuple(t.lower() for t in tokens[1:])
            fields["dof_line"] = num
        # id, limits, and documentation-style fields are discarded;
        # bare "(...)" lines are limit-range continuations
    if fields is not None:
        raise ParseError("unterminated bone block", line=fields["line"])
    return bones


def _finish_bone(fields: dict, angle_scale: float) -> AsfBone:
    line = fields["line"]
    for required in ("name", "direction", "length"):
        if required not in fields:
            raise ParseError(f"bone block missing {required!r}", line=line)
    direction = fields["direction"]
    length = fields["length"]
    norm = math.sqrt(sum(c * c for c in direction))
    if norm == 0.0:
        if length != 0.0:
            raise ParseError(f"bone {fields['name']!r}: zero direction with nonzero length", line=line)
    elif abs(norm - 1.0) > 1e-3:
        raise ParseError(f"bone {fields['name']!r}: direction is not unit length", line=line)
    else:
        direction = (direction[0] / norm, direction[1] / norm, direction[2] / norm)
    angles = fields.get("axis_angles", (0.0, 0.0, 0.0))
    angles = (angles[0] * angle_scale, angles[1] * angle_scale, angles[2] * angle_scale)
    order = fields.get("axis_order", "XYZ")
    if sorted(order) != ["X", "Y", "Z"]:
        raise ParseError(f"bone {fields['name']!r}: bad axis order {order!r}", line=fields.get("axis_line", line))
    try:
        return AsfBone(fields["name"], direction, length, angles, order, fields.get("dof", ()))
    except ValueError as exc:
        raise ParseError(str(exc), line=line) from None


def _parse_hierarchy(body, bone_map) -> dict[str, list[str]]:
    children: dict[str, list[str]] = {}
    assigned: set[str] = set()
    in_block = False
    for num, tokens in body:
        key = tokens[0].lower()
        if key == "begin":
            in_block = True
            continue
        if key == "end":
            in_block = False
            continue
        if not in_block:
            raise ParseError("hierarchy lines must sit between begin and end", line=num)
        parent = tokens[0]
        if parent != "root" and parent not in bone_map:
            raise ParseError(f"hierarchy references unknown bone {parent!r}", line=num)
        for child in tokens[1:]:
            if child not in bone_map:
                raise ParseError(f"hierarchy references unknown bone {child!r}", line=num)
            if child in assigned:
                raise ParseError(f"bone {child!r} has two parents", line=num)
            assigned.add(child)
            children.setdefault(parent, []).append(child)
    return children


# --- AMC -------------------------------------------------------------------


def parse_amc(
    text: str,
    skeleton: Skeleton,
    bones: list[AsfBone],
    frame_time: float = 1.0 / 120.0,
) -> MotionClip:
    """Decode an Acclaim motion file against its skeleton and bones.

    Bones absent from a frame stay at identity. Frame numbers must be
    strictly increasing; gaps are tolerated (numbers are labels, the clip
    keeps file order). ``frame_time`` defaults to the 120 fps standard for
    this format since the file itself carries no rate.
    """
    bone_map = {b.name: b for b in bones}
    root_channels = skeleton.joints[0].channels
    slots = skeleton.rotation_slot
    unit = 1.0  # degrees unless a :RADIANS header says otherwise

    frames: list[Pose] = []
    current: dict | None = None
    last_number: int | None = None

    def finish(current):
        rotations: list[Rotation] = [Rotation.identity()] * len(skeleton.posed_joints)
        for slot, rot in current["rots"].items():
            rotations[slot] = rot
        return Pose(current["root_t"], tuple(rotations), current["trans"])

    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith(":"):
            header = line[1:].strip().upper()
            if header == "RADIANS":
                unit = 180.0 / math.pi
            elif header == "DEGREES":
                unit = 1.0
            continue
        tokens = line.split()
        if len(tokens) == 1 and _is_int(tokens[0]):
            number = int(tokens[0])
            if last_number is not None and number <= last_number:
                raise ParseError(
                    f"frame numbers must increase: {number} after {last_number}", line=num
                )
            if current is not None:
                frames.append(finish(current))
            current = {"root_t": (0.0, 0.0, 0.0), "rots": {}, "trans": {}}
            last_number = number
            continue
        if current is None:
            raise ParseError("bone values before any frame number", line=num)

        name = tokens[0]
        values = [_float(t, num) for t in tokens[1:]]
        if name == "root":
            if len(values) != len(root_channels):
                raise ParseError(
                    f"root has {len(root_channels)} dof, line carries {len(values)}", line=num
                )
            tvec = [0.0, 0.0, 0.0]
            pairs = []
            for ch, v in zip(root_channels, values):
                if ch.startswith("T"):
                    tvec["XYZ".index(ch[1])] = v
                else:
                    pairs.append((ch[1], v * unit))
            current["root_t"] = tuple(tvec)
            current["rots"][slots[0]] = _compose_listed_first(pairs)
            continue
        bone = bone_map.get(name)
        if bone is None:
            raise ParseError(f"unknown bone {name!r}", line=num)
        if len(values) != len(bone.dof):
            raise ParseError(
                f"bone {name!r} has {len(bone.dof)} dof, line carries {len(values)}", line=num
            )
        joint_idx = skeleton.index_of(name)
        tvec = [0.0, 0.0, 0.0]
        saw_t = False
        pairs = []
        for d, v in zip(bone.dof, values):
            if d.startswith("t"):
                tvec["xyz".index(d[1])] = v
                saw_t = True
            else:
                pairs.append((d[1].upper(), v * unit))
        if pairs:
            axis = bone.axis_quat()
            rot = quat_mul(axis, quat_mul(_compose_listed_first(pairs), axis.conjugate()))
            current["rots"][slots[joint_idx]] = rot
        if saw_t:
            current["trans"][joint_idx] = tuple(tvec)

    if current is not None:
        frames.append(finish(current))
    return MotionClip(skeleton, frame_time, tuple(frames))


# --- small token helpers ----------------------------------------------------


def _last_line(text: str) -> int:
    return max(1, len(text.splitlines()))


def _float(token: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"expected a number, got {token!r}", line=line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite number {token!r}", line=line)
    return value


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def _is_int(token: str) -> bool:
    try:
        int(token)
        return True
    except ValueError:
        return False


def _vec3(tokens, line: int) -> Vec3:
    if len(tokens) != 3:
        raise ParseError("expected three numbers", line=line)
    return (_float(tokens[0], line), _float(tokens[1], line), _float(tokens[2], line))


def _bad(line: int, reason: str):
    raise ParseError(reason, line=line)
