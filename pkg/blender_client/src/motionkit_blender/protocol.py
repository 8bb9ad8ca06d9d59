"""Receiving side of the pose-stream wire protocol, version 1.

Messages are newline-delimited JSON objects, one per line, at most MAX_LINE
bytes including the newline. The controller speaks hello / register /
skeleton / frame / play_done / bye; this end answers with ack or error.
Error codes on the wire are exactly E_PROTO, E_DUP, E_NS, E_ORDER and
E_BADMSG; invalid input never tears the session down unless the line
framing itself is broken.

This module is self-contained on purpose: the add-on talks to controllers
only through these bytes.
"""

from __future__ import annotations

import json
import math
import re

PROTOCOL_VERSION = 1
DEFAULT_PORT = 9907
MAX_LINE = 1 << 20

NAMESPACE_RE = re.compile(r"\A[A-Za-z0-9_]{1,64}\Z")

CLIENT_TYPES = ("hello", "register", "skeleton", "frame", "play_done", "bye")

# the DCC caps bone name length; longer names would be silently truncated
MAX_BONE_NAME_BYTES = 63


class WireError(Exception):
    """A line that cannot become a valid message; maps to E_BADMSG."""


def encode_ack(target: str, ns: str | None = None) -> bytes:
    payload = {"type": "ack", "for": target}
    if ns is not None:
        payload["ns"] = ns
    return json.dumps(payload, separators=(",", ":")).encode() + b"\n"


def encode_error(code: str, message: str) -> bytes:
    payload = {"type": "error", "code": code, "message": message}
    return json.dumps(payload, separators=(",", ":")).encode() + b"\n"


def _reject_constant(token: str):
    raise WireError(f"line: non-finite constant {token!r}")


def parse_line(line: bytes) -> dict:
    """One wire line to a validated message dict, or WireError."""
    if len(line) > MAX_LINE:
        raise WireError(f"line: exceeds {MAX_LINE} bytes")
    try:
        text = line.decode("utf-8")
    except UnicodeDecodeError:
        raise WireError("line: not valid UTF-8") from None
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except RecursionError:
        raise WireError("line: nesting too deep") from None
    except ValueError:
        raise WireError("line: not valid JSON") from None
    if not isinstance(obj, dict):
        raise WireError("line: not a message object")

    mtype = obj.get("type")
    if mtype not in CLIENT_TYPES:
        raise WireError(f"type: not a client message type ({mtype!r})")
    if mtype == "hello":
        v = obj.get("version")
        if not isinstance(v, int) or isinstance(v, bool):
            raise WireError("version: expected an integer")
    elif mtype in ("register", "play_done"):
        _need_str(obj, "ns")
    elif mtype == "skeleton":
        _need_str(obj, "ns")
        _check_joints(obj.get("joints"))
    elif mtype == "frame":
        _need_str(obj, "ns")
        i = obj.get("i")
        if not isinstance(i, int) or isinstance(i, bool) or i < 0:
            raise WireError("i: expected an integer >= 0")
        _need_number(obj.get("t"), "t")
        _need_vec3(obj.get("root"), "root")
        q = obj.get("q")
        if not isinstance(q, list) or not q or len(q) % 4 != 0:
            raise WireError("q: expected a flat list of 4 values per joint")
        for k, value in enumerate(q):
            _need_number(value, f"q[{k}]")
    return obj


def _need_str(obj: dict, name: str) -> None:
    if not isinstance(obj.get(name), str):
        raise WireError(f"{name}: expected a string")


def _need_number(value, path: str) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise WireError(f"{path}: expected a number")
    try:
        if not math.isfinite(float(value)):
            raise WireError(f"{path}: must be finite")
    except OverflowError:
        raise WireError(f"{path}: must be finite") from None


def _need_vec3(value, path: str) -> None:
    if not isinstance(value, list) or len(value) != 3:
        raise WireError(f"{path}: expected an array of 3 numbers")
    for k, component in enumerate(value):
        _need_number(component, f"{path}[{k}]")


def _check_joints(joints) -> None:
    if not isinstance(joints, list) or not joints:
        raise WireError("joints: expected a non-empty array")
    names = set()
    for k, entry in enumerate(joints):
        if not isinstance(entry, dict):
            raise WireError(f"joints[{k}]: expected an object")
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise WireError(f"joints[{k}].name: expected a non-empty string")
        if len(name.encode()) > MAX_BONE_NAME_BYTES:
            raise WireError(f"joints[{k}].name: longer than the DCC bone name limit")
        if name in names:
            raise WireError(f"joints[{k}].name: duplicate joint name {name!r}")
        names.add(name)
        parent = entry.get("parent")
        if not isinstance(parent, int) or isinstance(parent, bool):
            raise WireError(f"joints[{k}].parent: expected an integer")
        if k == 0:
            if parent != -1:
                raise WireError("joints[0].parent: root must use -1")
        elif not 0 <= parent < k:
            raise WireError(f"joints[{k}].parent: must point at an earlier joint")
        elif joints[parent].get("end", False):
            raise WireError(f"joints[{k}].parent: terminal joints cannot have children")
        _need_vec3(entry.get("offset"), f"joints[{k}].offset")
        if "end" in entry and not isinstance(entry["end"], bool):
            raise WireError(f"joints[{k}].end: expected a boolean")
    if joints[0].get("end", False):
        raise WireError("joints[0].end: the root cannot be terminal")


class _Character:
    __slots__ = ("joints", "quat_values", "last_index")

    def __init__(self, joints):
        self.joints = joints
        if joints is None:
            self.quat_values = 0
        else:
            self.quat_values = 4 * sum(1 for j in joints if not j.get("end", False))
        self.last_index = -1


class ServerSession:
    """Protocol state for one controller connection.

    ``feed_line`` returns (replies, events): raw bytes to write back, and
    validated scene updates for the drain queue. Session state lives on the
    I/O thread; events are the only thing that crosses threads.
    """

    def __init__(self):
        self.version: int | None = None
        self.closed = False
        self.characters: dict[str, _Character] = {}

    def feed_line(self, line: bytes) -> tuple[list[bytes], list[tuple]]:
        try:
            message = parse_line(line)
        except WireError as exc:
            return [encode_error("E_BADMSG", str(exc))], []
        return self.feed(message)

    def feed(self, message: dict) -> tuple[list[bytes], list[tuple]]:
        mtype = message["type"]
        if self.closed:
            return [encode_error("E_PROTO", "session is closed")], []

        if self.version is None:
            if mtype != "hello":
                return [encode_error("E_PROTO", f"expected hello first, got {mtype!r}")], []
            if message["version"] != PROTOCOL_VERSION:
                return [
                    encode_error("E_PROTO", f"unsupported protocol version {message['version']}")
                ], []
            self.version = message["version"]
            return [encode_ack("hello")], []

        if mtype == "hello":
            return [encode_error("E_PROTO", "duplicate hello")], []

        if mtype == "register":
            ns = message["ns"]
            if not NAMESPACE_RE.match(ns):
                return [encode_error("E_BADMSG", "ns: must match [A-Za-z0-9_]{1,64}")], []
            if ns in self.characters:
                return [encode_error("E_DUP", f"namespace {ns!r} is already registered")], []
            self.characters[ns] = _Character(joints=None)
            return [encode_ack("register", ns)], []

        if mtype == "skeleton":
            ns = message["ns"]
            character = self.characters.get(ns)
            if character is None:
                return [encode_error("E_NS", f"namespace {ns!r} is not registered")], []
            if character.joints is not None:
                return [encode_error("E_PROTO", f"namespace {ns!r} already has a skeleton")], []
            self.characters[ns] = _Character(message["joints"])
            return [encode_ack("skeleton", ns)], [("build", ns, message["joints"])]

        if mtype == "frame":
            ns = message["ns"]
            character = self.characters.get(ns)
            if character is None or character.joints is None:
                return [encode_error("E_NS", f"namespace {ns!r} has no registered skeleton")], []
            if message["i"] <= character.last_index:
                return [
                    encode_error(
                        "E_ORDER",
                        f"frame index {message['i']} not greater than {character.last_index}",
                    )
                ], []
            if len(message["q"]) != character.quat_values:
                return [
                    encode_error(
                        "E_BADMSG",
                        f"q: expected {character.quat_values} values for this skeleton,"
                        f" got {len(message['q'])}",
                    )
                ], []
            character.last_index = message["i"]
            return [], [("frame", ns, message["i"], message["root"], message["q"])]

        if mtype == "play_done":
            ns = message["ns"]
            if ns not in self.characters:
                return [encode_error("E_NS", f"namespace {ns!r} is not registered")], []
            return [encode_ack("play_done", ns)], []

        if mtype == "bye":
            self.closed = True
            return [encode_ack("bye")], [("done",)]

        return [encode_error("E_PROTO", f"unhandled message type {mtype!r}")], []
