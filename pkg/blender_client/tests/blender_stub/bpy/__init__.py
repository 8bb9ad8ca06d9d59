"""In-process stand-in for the DCC scripting API, deep enough for the
live-link add-on: armature building through edit mode, pose bones whose
matrices compose the way the DCC composes them, app timers, and operator
registration. State is process-global, like the real thing; tests call
``stub_reset`` between cases.

Deliberately mimicked quirks:
  * edit bones start with head == tail and zero-length bones are dropped on
    leaving edit mode, so forgetting the epsilon-bone rule loses bones;
  * names collide per datablock type and get ".001"-style suffixes;
  * ``edit_bones`` is only reachable in edit mode.
"""

from __future__ import annotations

import math

from mathutils import Matrix, Vector


# -- datablocks ---------------------------------------------------------------


class _Collection:
    """Ordered name-addressable container (subset of bpy_prop_collection)."""

    def __init__(self):
        self._items = []

    def _add(self, item):
        self._items.append(item)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __contains__(self, name):
        return any(i.name == name for i in self._items)

    def __getitem__(self, key):
        if isinstance(key, int):
            return self._items[key]
        for item in self._items:
            if item.name == key:
                return item
        raise KeyError(key)

    def get(self, key, default=None):
        try:
            return self[key]
        except KeyError:
            return default

    def keys(self):
        return [i.name for i in self._items]


def _unique_name(taken, wanted: str) -> str:
    if wanted not in taken:
        return wanted
    k = 1
    while f"{wanted}.{k:03d}" in taken:
        k += 1
    return f"{wanted}.{k:03d}"


class _EditBone:
    def __init__(self, name: str):
        self.name = name
        self._head = Vector((0.0, 0.0, 0.0))
        self._tail = Vector((0.0, 0.0, 0.0))
        self.roll = 0.0
        self.parent = None
        self.use_connect = False

    @property
    def head(self):
        return self._head

    @head.setter
    def head(self, value):
        self._head = Vector(value)

    @property
    def tail(self):
        return self._tail

    @tail.setter
    def tail(self, value):
        self._tail = Vector(value)


class _EditBones(_Collection):
    def new(self, name: str) -> _EditBone:
        bone = _EditBone(_unique_name(set(self.keys()), name))
        self._add(bone)
        return bone


def _vec_roll_to_mat3(direction: Vector, roll: float) -> Matrix:
    """Rest orientation convention: bone +Y along ``direction``, then roll."""
    nor = direction.normalized()
    target = Vector((0.0, 1.0, 0.0))
    axis = target.cross(nor)
    if axis.length > 1e-10:
        axis = axis.normalized()
        cos_t = max(-1.0, min(1.0, target.dot(nor)))
        theta = math.acos(cos_t)
        base = _axis_angle_mat3(axis, theta)
    elif target.dot(nor) > 0:
        base = Matrix.Identity(3)
    else:
        # anti-parallel: half turn about Z keeps the frame right-handed
        base = Matrix(((-1, 0, 0), (0, -1, 0), (0, 0, 1)))
    if roll:
        base = _axis_angle_mat3(nor, roll) @ base
    return base


def _axis_angle_mat3(axis: Vector, angle: float) -> Matrix:
    x, y, z = axis.x, axis.y, axis.z
    c, s = math.cos(angle), math.sin(angle)
    t = 1.0 - c
    return Matrix(
        (
            (t * x * x + c, t * x * y - s * z, t * x * z + s * y),
            (t * x * y + s * z, t * y * y + c, t * y * z - s * x),
            (t * x * z - s * y, t * y * z + s * x, t * z * z + c),
        )
    )


class _Bone:
    def __init__(self, edit: _EditBone):
        self.name = edit.name
        self.head_local = edit.head.copy()
        self.tail_local = edit.tail.copy()
        self.parent = None  # rewired to _Bone after all bones exist
        local = _vec_roll_to_mat3(edit.tail - edit.head, edit.roll).to_4x4()
        local.translation = edit.head
        self.matrix_local = local


class _PoseBone:
    def __init__(self, bone: _Bone):
        self.name = bone.name
        self.bone = bone
        self.parent = None
        self.matrix_basis = Matrix.Identity(4)
        self.rotation_mode = "QUATERNION"
        self.keyframes = []

    @property
    def matrix(self) -> Matrix:
        own = self.bone.matrix_local @ self.matrix_basis
        if self.parent is None:
            return own
        return self.parent.matrix @ self.parent.bone.matrix_local.inverted() @ own

    @property
    def head(self) -> Vector:
        return self.matrix.translation

    def keyframe_insert(self, data_path: str, frame: int = 0):
        self.keyframes.append((data_path, int(frame)))


class _Pose:
    def __init__(self):
        self.bones = _Collection()


class _Armature:
    def __init__(self, name: str):
        self.name = name
        self.bones = _Collection()
        self._edit = None

    @property
    def edit_bones(self) -> _EditBones:
        if self._edit is None:
            raise RuntimeError("edit_bones is only available in edit mode")
        return self._edit


class _Object:
    def __init__(self, name: str, data):
        self.name = name
        self.data = data
        self.pose = _Pose() if isinstance(data, _Armature) else None
        self.matrix_world = Matrix.Identity(4)
        self.selected = False

    def select_set(self, value: bool):
        self.selected = bool(value)


class _Armatures(_Collection):
    def new(self, name: str) -> _Armature:
        arm = _Armature(_unique_name(set(self.keys()), name))
        self._add(arm)
        return arm


class _Objects(_Collection):
    def new(self, name: str, object_data) -> _Object:
        obj = _Object(_unique_name(set(self.keys()), name), object_data)
        self._add(obj)
        return obj


class _Data:
    def __init__(self):
        self.armatures = _Armatures()
        self.objects = _Objects()


# -- context and scene --------------------------------------------------------


class _SceneObjects(_Collection):
    def link(self, obj: _Object):
        if obj in self._items:
            raise RuntimeError(f"object {obj.name!r} is already linked")
        self._add(obj)


class _SceneCollection:
    def __init__(self):
        self.objects = _SceneObjects()


class _Scene:
    def __init__(self):
        self.collection = _SceneCollection()


class _ViewLayerObjects:
    def __init__(self):
        self.active = None


class _ViewLayer:
    def __init__(self):
        self.objects = _ViewLayerObjects()

    def update(self):
        pass


class _Context:
    def __init__(self):
        self.scene = _Scene()
        self.view_layer = _ViewLayer()
        self.mode = "OBJECT"


# -- operators namespace (bpy.ops) ---------------------------------------------


class _ObjectOps:
    def mode_set(self, mode: str):
        obj = context.view_layer.objects.active
        if obj is None or not isinstance(obj.data, _Armature):
            raise RuntimeError("mode_set needs an active armature object")
        if mode == "EDIT":
            obj.data._edit = _EditBones()
            context.mode = "EDIT_ARMATURE"
        elif mode == "OBJECT":
            if obj.data._edit is not None:
                _finalize_edit(obj)
            context.mode = "OBJECT"
        else:
            raise RuntimeError(f"unsupported mode {mode!r}")
        return {'FINISHED'}


def _finalize_edit(obj: _Object):
    armature = obj.data
    survivors = [e for e in armature._edit if (e.tail - e.head).length >= 1e-8]
    armature._edit = None
    armature.bones = _Collection()
    by_edit = {}
    for edit in survivors:
        bone = _Bone(edit)
        by_edit[id(edit)] = bone
        armature.bones._add(bone)
    for edit in survivors:
        if edit.parent is not None and id(edit.parent) in by_edit:
            by_edit[id(edit)].parent = by_edit[id(edit.parent)]
    obj.pose = _Pose()
    by_bone = {}
    for bone in armature.bones:
        pose_bone = _PoseBone(bone)
        by_bone[bone.name] = pose_bone
        obj.pose.bones._add(pose_bone)
    for pose_bone in obj.pose.bones:
        if pose_bone.bone.parent is not None:
            pose_bone.parent = by_bone[pose_bone.bone.parent.name]


class _Ops:
    def __init__(self):
        self.object = _ObjectOps()


# -- timers (bpy.app.timers) ----------------------------------------------------


class _Timers:
    """Deterministic version: ``pump`` runs every registered callback once."""

    def __init__(self):
        self._entries = []  # (fn, last returned interval or None)

    def register(self, fn, first_interval: float = 0.0, persistent: bool = False):
        self._entries.append([fn, first_interval])

    def unregister(self, fn):
        before = len(self._entries)
        self._entries = [e for e in self._entries if e[0] is not fn]
        if len(self._entries) == before:
            raise ValueError("timer is not registered")

    def is_registered(self, fn) -> bool:
        return any(e[0] is fn for e in self._entries)

    def pump(self, times: int = 1) -> int:
        """Run each registered callback ``times`` times; returns calls made."""
        calls = 0
        for _ in range(times):
            for entry in list(self._entries):
                result = entry[0]()
                calls += 1
                if result is None:
                    self._entries = [e for e in self._entries if e is not entry]
                else:
                    entry[1] = float(result)
        return calls


class _App:
    def __init__(self):
        self.timers = _Timers()
        self.background = True


# -- types and props (operator plumbing) ----------------------------------------


class _PropDefault:
    __slots__ = ("default",)

    def __init__(self, default):
        self.default = default


class _Types:
    class Operator:
        def __init__(self):
            self.reports = []

        def __getattr__(self, name):
            for klass in type(self).__mro__:
                marker = getattr(klass, "__annotations__", {}).get(name)
                if isinstance(marker, _PropDefault):
                    return marker.default
            raise AttributeError(name)

        def report(self, levels, message: str):
            level = next(iter(levels)) if isinstance(levels, (set, frozenset)) else levels
            self.reports.append((level, message))


class _Props:
    @staticmethod
    def IntProperty(default=0, **_kw):
        return _PropDefault(int(default))

    @staticmethod
    def BoolProperty(default=False, **_kw):
        return _PropDefault(bool(default))

    @staticmethod
    def StringProperty(default="", **_kw):
        return _PropDefault(str(default))


class _Utils:
    def __init__(self):
        self.registered = []

    def register_class(self, cls):
        self.registered.append(cls)

    def unregister_class(self, cls):
        self.registered = [c for c in self.registered if c is not cls]


# -- module surface --------------------------------------------------------------

data = _Data()
context = _Context()
ops = _Ops()
app = _App()
types = _Types()
props = _Props()
utils = _Utils()


def stub_reset():
    """Fresh scene and timers; test fixture hook, not part of the real API."""
    global data, context
    data = _Data()
    context = _Context()
    app.timers._entries.clear()
    utils.registered.clear()
