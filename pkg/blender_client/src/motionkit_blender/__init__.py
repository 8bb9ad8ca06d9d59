"""Blender add-on: receive live skeleton poses over TCP and drive armatures.

The add-on listens (the animation tool is the server; controllers connect
and push poses). Start/stop from the operators below, or call
``motionkit_blender.headless.serve_once`` from a background-mode script.
"""

import bpy

from . import listener

bl_info = {
    "name": "MotionKit Live Link",
    "author": "motionkit contributors",
    "version": (0, 1, 0),
    "blender": (3, 0, 0),
    "location": "Search: MotionKit Live Link",
    "description": "Stream skeleton poses into armatures over TCP",
    "category": "Animation",
}

_TICK_SECONDS = 1.0 / 60.0
_active: listener.LiveLink | None = None


def _tick():
    if _active is None:
        return None  # unregisters the timer
    _active.drain()
    return _TICK_SECONDS


def active_link() -> listener.LiveLink | None:
    return _active


class MOTIONKIT_OT_start_live_link(bpy.types.Operator):
    """Start listening for a pose-streaming controller"""

    bl_idname = "motionkit.start_live_link"
    bl_label = "Start MotionKit Live Link"

    port: bpy.props.IntProperty(name="Port", default=9907, min=1, max=65535)
    record: bpy.props.BoolProperty(name="Record Keyframes", default=False)

    def execute(self, context):
        global _active
        if _active is not None:
            self.report({'ERROR'}, "live link is already running")
            return {'CANCELLED'}
        link = listener.LiveLink(port=self.port, record=self.record)
        try:
            link.start()
        except OSError as exc:
            self.report({'ERROR'}, str(exc))
            return {'CANCELLED'}
        _active = link
        bpy.app.timers.register(_tick, first_interval=_TICK_SECONDS)
        self.report({'INFO'}, f"live link listening on {link.host}:{link.port}")
        return {'FINISHED'}


class MOTIONKIT_OT_stop_live_link(bpy.types.Operator):
    """Stop the pose-streaming listener"""

    bl_idname = "motionkit.stop_live_link"
    bl_label = "Stop MotionKit Live Link"

    def execute(self, context):
        global _active
        if _active is None:
            self.report({'ERROR'}, "live link is not running")
            return {'CANCELLED'}
        link = _active
        _active = None  # makes the next tick unregister the timer
        link.drain()
        link.stop()
        self.report({'INFO'}, "live link stopped")
        return {'FINISHED'}


_CLASSES = (MOTIONKIT_OT_start_live_link, MOTIONKIT_OT_stop_live_link)


def register():
    for cls in _CLASSES:
        bpy.utils.register_class(cls)


def unregister():
    global _active
    if _active is not None:
        link = _active
        _active = None
        link.stop()
    for cls in _CLASSES:
        bpy.utils.unregister_class(cls)
