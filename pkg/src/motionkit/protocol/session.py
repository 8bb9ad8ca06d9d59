"""Server-side session state machine.

``session_step`` is a pure function from (state, message) to (new state,
optional reply). All networking lives elsewhere; this is the part that
decides what a message means, so it can be tested exhaustively with plain
values. Frames get no reply (streaming must not stall on round trips);
control messages are acknowledged or answered with an error carrying one of
the documented codes:

    E_PROTO   message out of phase (before hello, after bye, duplicate
              hello or skeleton, client sent a server-only type, or an
              unsupported protocol version)
    E_DUP     register for a namespace that already exists
    E_NS      frame or play_done for an unregistered namespace, or a frame
              before the namespace's skeleton arrived
    E_ORDER   frame index not strictly increasing within its namespace
    E_BADMSG  malformed message (decode failure, bad namespace string,
              malformed skeleton tree, wrong q length)

Errors never close the session by themselves; the transport decides that.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .messages import NAMESPACE_RE, PROTOCOL_VERSION


@dataclass(frozen=True)
class NamespaceState:
    joints: tuple | None = None  # wire joint entries, once the skeleton arrived
    last_index: int = -1
    frame_count: int = 0

    @property
    def quat_values(self) -> int:
        """Expected length of a frame's q list (4 per non-end joint)."""
        assert self.joints is not None
        return 4 * sum(1 for j in self.joints if not j.get("end", False))


@dataclass(frozen=True)
class SessionState:
    version: int | None = None  # None until hello
    namespaces: dict = field(default_factory=dict)
    closed: bool = False


def _error(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


def session_step(state: SessionState, message: dict) -> tuple[SessionState, dict | None]:
    """Apply one decoded message; returns the new state and the reply."""
    mtype = message["type"]

    if state.closed:
        return state, _error("E_PROTO", "session is closed")

    if state.version is None:
        if mtype != "hello":
            return state, _error("E_PROTO", f"expected hello first, got {mtype!r}")
        if message["version"] != PROTOCOL_VERSION:
            return state, _error(
                "E_PROTO", f"unsupported protocol version {message['version']}"
            )
        return replace(state, version=message["version"]), {"type": "ack", "for": "hello"}

    if mtype == "hello":
        return state, _error("E_PROTO", "duplicate hello")

    if mtype in ("ack", "error"):
        return state, _error("E_PROTO", f"{mtype!r} is not a client message")

    if mtype == "register":
        ns = message["ns"]
        if not NAMESPACE_RE.match(ns):
            return state, _error("E_BADMSG", "ns: must match [A-Za-z0-9_]{1,64}")
        if ns in state.namespaces:
            return state, _error("E_DUP", f"namespace {ns!r} is already registered")
        namespaces = dict(state.namespaces)
        namespaces[ns] = NamespaceState()
        return replace(state, namespaces=namespaces), {"type": "ack", "for": "register", "ns": ns}

    if mtype == "skeleton":
        ns = message["ns"]
        entry = state.namespaces.get(ns)
        if entry is None:
            return state, _error("E_NS", f"namespace {ns!r} is not registered")
        if entry.joints is not None:
            return state, _error("E_PROTO", f"namespace {ns!r} already has a skeleton")
        problem = _check_tree(message["joints"])
        if problem:
            return state, _error("E_BADMSG", problem)
        namespaces = dict(state.namespaces)
        namespaces[ns] = replace(entry, joints=tuple(message["joints"]))
        return replace(state, namespaces=namespaces), {"type": "ack", "for": "skeleton", "ns": ns}

    if mtype == "frame":
        ns = message["ns"]
        entry = state.namespaces.get(ns)
        if entry is None or entry.joints is None:
            return state, _error("E_NS", f"namespace {ns!r} has no registered skeleton")
        if message["i"] <= entry.last_index:
            return state, _error(
                "E_ORDER",
                f"frame index {message['i']} not greater than {entry.last_index}",
            )
        if len(message["q"]) != entry.quat_values:
            return state, _error(
                "E_BADMSG",
                f"q: expected {entry.quat_values} values for this skeleton, got {len(message['q'])}",
            )
        namespaces = dict(state.namespaces)
        namespaces[ns] = replace(
            entry, last_index=message["i"], frame_count=entry.frame_count + 1
        )
        return replace(state, namespaces=namespaces), None

    if mtype == "play_done":
        ns = message["ns"]
        if ns not in state.namespaces:
            return state, _error("E_NS", f"namespace {ns!r} is not registered")
        return state, {"type": "ack", "for": "play_done", "ns": ns}

    if mtype == "bye":
        return replace(state, closed=True), {"type": "ack", "for": "bye"}

    return state, _error("E_PROTO", f"unhandled message type {mtype!r}")


def _check_tree(joints) -> str | None:
    """Tree-shape validation beyond field types; None when well-formed."""
    names = set()
    for k, entry in enumerate(joints):
        if entry["name"] in names:
            return f"joints[{k}].name: duplicate joint name {entry['name']!r}"
        names.add(entry["name"])
        parent = entry["parent"]
        if k == 0:
            if parent != -1:
                return "joints[0].parent: root must use -1"
        elif not 0 <= parent < k:
            return f"joints[{k}].parent: must point at an earlier joint"
        elif joints[parent].get("end", False):
            return f"joints[{k}].parent: terminal joints cannot have children"
    if joints and joints[0].get("end", False):
        return "joints[0].end: the root cannot be terminal"
    return None
