"""Pose math for the live link, free of any DCC imports.

Everything here works on plain tuples: wire joints become rest-pose bone
segments, wire frames become per-bone target matrices, and targets become
the local basis matrices the DCC wants. The scene layer converts results
into DCC types only at assignment time, which keeps this module testable
anywhere.
"""

from __future__ import annotations

import math
from typing import NamedTuple

Vec3 = tuple[float, float, float]
Mat3 = tuple[tuple[float, float, float], ...]
Mat4 = tuple[tuple[float, float, float, float], ...]

# DCCs refuse zero-length bones; tip bones get this length instead
EPSILON_BONE = 1e-3

IDENTITY3: Mat3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


class JointView(NamedTuple):
    """One wire joint, normalized for math use. ``parent`` is -1 for the root."""

    name: str
    parent: int
    offset: Vec3
    end: bool


def joint_views(wire_joints) -> tuple[JointView, ...]:
    return tuple(
        JointView(
            name=entry["name"],
            parent=entry["parent"],
            offset=tuple(float(c) for c in entry["offset"]),
            end=bool(entry.get("end", False)),
        )
        for entry in wire_joints
    )


def quat_matrix(q) -> Mat3:
    """Row-major rotation matrix from a (w, x, y, z) quaternion.

    Wire values are renormalized; a (near-)zero quaternion degrades to the
    identity so a bad frame can never take the drain loop down.
    """
    w, x, y, z = (float(c) for c in q)
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n < 1e-9:
        return IDENTITY3
    w, x, y, z = w / n, x / n, y / n, z / n
    return (
        (1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)),
        (2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)),
        (2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)),
    )


def mat3_mul(a: Mat3, b: Mat3) -> Mat3:
    return tuple(
        tuple(a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c] for c in range(3))
        for r in range(3)
    )


def mat3_apply(m: Mat3, v: Vec3) -> Vec3:
    return tuple(m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] for r in range(3))


def compose(rotation: Mat3, translation: Vec3) -> Mat4:
    r, t = rotation, translation
    return (
        (r[0][0], r[0][1], r[0][2], t[0]),
        (r[1][0], r[1][1], r[1][2], t[1]),
        (r[2][0], r[2][1], r[2][2], t[2]),
        (0.0, 0.0, 0.0, 1.0),
    )


def mat_mul(a: Mat4, b: Mat4) -> Mat4:
    return tuple(
        tuple(sum(a[r][k] * b[k][c] for k in range(4)) for c in range(4))
        for r in range(4)
    )


def rigid_inverse(m: Mat4) -> Mat4:
    """Inverse of a rotation-plus-translation matrix (no scale, no shear)."""
    rows = []
    for r in range(3):
        rows.append(
            (
                m[0][r],
                m[1][r],
                m[2][r],
                -(m[0][r] * m[0][3] + m[1][r] * m[1][3] + m[2][r] * m[2][3]),
            )
        )
    rows.append((0.0, 0.0, 0.0, 1.0))
    return tuple(rows)


def rest_heads(views: tuple[JointView, ...]) -> tuple[Vec3, ...]:
    """Identity-pose joint positions: offsets summed down the parent chain."""
    heads: list[Vec3] = []
    for view in views:
        if view.parent < 0:
            heads.append(view.offset)
        else:
            p = heads[view.parent]
            heads.append((p[0] + view.offset[0], p[1] + view.offset[1], p[2] + view.offset[2]))
    return tuple(heads)


def bone_tails(views: tuple[JointView, ...], heads: tuple[Vec3, ...]) -> tuple[Vec3, ...]:
    """Rest tail per bone: along the offset toward the first child, so the
    bone occupies the parent-to-child segment with its exact length. Joints
    without a usable child direction (tips, coincident children) get an
    epsilon bone instead, which the DCC would otherwise delete.
    """
    first_child = [-1] * len(views)
    for idx, view in enumerate(views):
        if view.parent >= 0 and first_child[view.parent] < 0:
            first_child[view.parent] = idx
    tails: list[Vec3] = []
    for idx, head in enumerate(heads):
        child = first_child[idx]
        d = views[child].offset if child >= 0 else (0.0, 0.0, 0.0)
        if math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) < 1e-9:
            d = (0.0, EPSILON_BONE, 0.0)
        tails.append((head[0] + d[0], head[1] + d[1], head[2] + d[2]))
    return tuple(tails)


def pose_targets(views: tuple[JointView, ...], root: Vec3, quats) -> tuple[Mat4, ...]:
    """Armature-space matrix per joint for one wire frame.

    Mirrors the controller's kinematics: root position is the streamed
    translation plus the rest offset, children hang off the parent rotation,
    and terminal joints inherit the parent's rotation. ``quats`` holds four
    values per non-terminal joint in joint order.
    """
    rotations: list[Mat3] = []
    positions: list[Vec3] = []
    qi = 0
    for view in views:
        if view.parent < 0:
            rotation = quat_matrix(quats[qi:qi + 4])
            qi += 4
            position = (
                float(root[0]) + view.offset[0],
                float(root[1]) + view.offset[1],
                float(root[2]) + view.offset[2],
            )
        else:
            parent_rot = rotations[view.parent]
            parent_pos = positions[view.parent]
            step = mat3_apply(parent_rot, view.offset)
            position = (parent_pos[0] + step[0], parent_pos[1] + step[1], parent_pos[2] + step[2])
            if view.end:
                rotation = parent_rot
            else:
                rotation = mat3_mul(parent_rot, quat_matrix(quats[qi:qi + 4]))
                qi += 4
        rotations.append(rotation)
        positions.append(position)
    return tuple(compose(r, p) for r, p in zip(rotations, positions))


def basis_matrices(
    targets: tuple[Mat4, ...],
    rest_locals: tuple[Mat4, ...],
    parents: list[int],
) -> tuple[Mat4, ...]:
    """Local pose matrices that make every bone land on its target.

    The DCC composes pose(j) = pose(parent) @ rest(parent)^-1 @ rest(j) @
    basis(j); solving for basis with pose(parent) = target(parent) pins the
    whole chain to the targets by induction.
    """
    out: list[Mat4] = []
    for idx, target in enumerate(targets):
        parent = parents[idx]
        rest_inv = rigid_inverse(rest_locals[idx])
        if parent < 0:
            out.append(mat_mul(rest_inv, target))
        else:
            chain = mat_mul(rest_locals[parent], mat_mul(rigid_inverse(targets[parent]), target))
            out.append(mat_mul(rest_inv, chain))
    return tuple(out)
