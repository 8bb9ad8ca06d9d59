"""Everything that mutates the DCC scene.

Only the drain side of the listener calls in here. Every mutating entry
point records the calling thread in MUTATION_THREADS, so a test (or a
paranoid session) can prove that scene state was never touched from the
network thread.
"""

from __future__ import annotations

import threading

import bpy
from mathutils import Matrix

from . import rig

MUTATION_CALLS = 0
MUTATION_THREADS: set[int] = set()


def _record_mutation() -> None:
    global MUTATION_CALLS
    MUTATION_CALLS += 1
    MUTATION_THREADS.add(threading.get_ident())


class CharacterBinding:
    """One streamed character: its namespace, armature, and bone lookups."""

    def __init__(self, namespace, obj, views, rest_locals):
        self.namespace = namespace
        self.object = obj
        self.views = views
        self.bone_names = [v.name for v in views]
        self.parents = [v.parent for v in views]
        self.rest_locals = rest_locals
        self.last_index = -1

    def __len__(self) -> int:
        return len(self.bone_names)


def build_armature(namespace: str, wire_joints) -> CharacterBinding:
    """Create an armature for a streamed skeleton, one bone per joint.

    Bone heads sit at the identity-pose joint positions; tails run along the
    offset to the first child (tips get an epsilon bone). The armature object
    takes the namespace as its name; the DCC uniquifies on collision.
    """
    _record_mutation()
    views = rig.joint_views(wire_joints)
    heads = rig.rest_heads(views)
    tails = rig.bone_tails(views, heads)

    data = bpy.data.armatures.new(namespace)
    obj = bpy.data.objects.new(namespace, data)
    bpy.context.scene.collection.objects.link(obj)
    bpy.context.view_layer.objects.active = obj
    obj.select_set(True)

    bpy.ops.object.mode_set(mode="EDIT")
    edit_bones = []
    for view, head, tail in zip(views, heads, tails):
        bone = data.edit_bones.new(view.name)
        bone.head = head
        bone.tail = tail
        if view.parent >= 0:
            bone.parent = edit_bones[view.parent]
        edit_bones.append(bone)
    bpy.ops.object.mode_set(mode="OBJECT")

    rest_locals = tuple(
        tuple(tuple(row) for row in data.bones[view.name].matrix_local) for view in views
    )
    for view in views:
        obj.pose.bones[view.name].rotation_mode = "QUATERNION"
    return CharacterBinding(namespace, obj, views, rest_locals)


def apply_frame(binding: CharacterBinding, index: int, root, quats, record: bool = False) -> None:
    """Pose every bone of one character from a validated wire frame."""
    _record_mutation()
    targets = rig.pose_targets(binding.views, root, quats)
    basis = rig.basis_matrices(targets, binding.rest_locals, binding.parents)
    pose_bones = binding.object.pose.bones
    for name, matrix in zip(binding.bone_names, basis):
        bone = pose_bones[name]
        bone.matrix_basis = Matrix(matrix)
        if record:
            bone.keyframe_insert("location", frame=index)
            bone.keyframe_insert("rotation_quaternion", frame=index)
    binding.last_index = index
