"""Wire message codec, protocol version 1.

One message per LF-terminated UTF-8 line, at most ``MAX_LINE`` bytes. A
message is a JSON object with a ``type`` field; the per-type required
fields are listed in ``REQUIRED_FIELDS``. ``decode(encode(m)) == m`` for
every valid message, and ``encode`` emits a fixed key order (type first),
so byte output is deterministic; hello encodes to exactly
``{"type":"hello","version":1}`` plus the newline.

``decode`` raises :class:`~motionkit.errors.ProtocolError` with code
``E_BADMSG`` and a field-path message on any malformed input. It never
raises anything else, no matter the bytes (fuzz contract).
"""

from __future__ import annotations

import json
import math
import re

from ..errors import ProtocolError

PROTOCOL_VERSION = 1
DEFAULT_PORT = 9907
MAX_LINE = 1 << 20  # bytes, including the newline

# \Z, not $: the dollar anchor would also match just before a trailing newline
NAMESPACE_RE = re.compile(r"\A[A-Za-z0-9_]{1,64}\Z")

# field order here is also the encode order (after "type")
REQUIRED_FIELDS = {
    "hello": ("version",),
    "ack": ("for",),
    "error": ("code", "message"),
    "register": ("ns",),
    "skeleton": ("ns", "joints"),
    "frame": ("ns", "i", "t", "root", "q"),
    "play_done": ("ns",),
    "bye": (),
}
_OPTIONAL_FIELDS = {"ack": ("ns",)}

ERROR_CODES = ("E_PROTO", "E_DUP", "E_NS", "E_ORDER", "E_BADMSG")


def _bad(path: str, reason: str) -> ProtocolError:
    return ProtocolError("E_BADMSG", f"{path}: {reason}")


def encode(message: dict) -> bytes:
    """Serialize one message to its wire line (newline included)."""
    mtype = message.get("type")
    if mtype not in REQUIRED_FIELDS:
        raise ProtocolError("E_BADMSG", f"type: unknown type {mtype!r}")
    _validate_fields(message)
    ordered = {"type": mtype}
    for name in REQUIRED_FIELDS[mtype] + _OPTIONAL_FIELDS.get(mtype, ()):
        if name in message:
            ordered[name] = message[name]
    line = json.dumps(ordered, separators=(",", ":"), ensure_ascii=False, allow_nan=False)
    data = line.encode("utf-8") + b"\n"
    if len(data) > MAX_LINE:
        raise ProtocolError("E_BADMSG", f"message of {len(data)} bytes exceeds the {MAX_LINE} byte line limit")
    return data


def decode(line: bytes | str) -> dict:
    """Parse and validate one wire line into a message dict."""
    if isinstance(line, str):
        raw = line.encode("utf-8", errors="surrogatepass")
    else:
        raw = line
    if len(raw) > MAX_LINE:
        raise _bad("line", f"{len(raw)} bytes exceeds the {MAX_LINE} byte limit")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise _bad("line", "not valid UTF-8") from None
    if "\n" in text.rstrip("\n"):
        raise _bad("line", "embedded newline")
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise _bad("line", f"not a valid message object: {exc.msg}") from None
    except RecursionError:
        raise _bad("line", "nesting too deep") from None
    except ValueError as exc:  # e.g. integer literals past the digit limit
        raise _bad("line", f"not a valid message object: {exc}") from None
    if not isinstance(obj, dict):
        raise _bad("line", "message must be an object")
    mtype = obj.get("type")
    if not isinstance(mtype, str):
        raise _bad("type", "missing or not a string")
    if mtype not in REQUIRED_FIELDS:
        raise _bad("type", f"unknown type {mtype!r}")
    allowed = {"type", *REQUIRED_FIELDS[mtype], *_OPTIONAL_FIELDS.get(mtype, ())}
    for key in obj:
        if key not in allowed:
            raise _bad(key, f"unknown field for type {mtype!r}")
    for name in REQUIRED_FIELDS[mtype]:
        if name not in obj:
            raise _bad(name, "missing required field")
    _validate_fields(obj)
    return obj


def _reject_constant(token: str):
    raise ProtocolError("E_BADMSG", f"line: non-finite constant {token!r}")


def _validate_fields(msg: dict) -> None:
    mtype = msg["type"]
    if mtype == "hello":
        v = msg["version"]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise _bad("version", "expected a positive integer")
    elif mtype == "ack":
        target = msg["for"]
        if not isinstance(target, str) or target not in REQUIRED_FIELDS:
            raise _bad("for", "expected a message type name")
        if "ns" in msg:
            _check_str(msg, "ns")
    elif mtype == "error":
        _check_str(msg, "code")
        _check_str(msg, "message")
    elif mtype in ("register", "play_done"):
        _check_str(msg, "ns")
    elif mtype == "skeleton":
        _check_str(msg, "ns")
        _check_joints(msg["joints"])
    elif mtype == "frame":
        _check_str(msg, "ns")
        i = msg["i"]
        if not isinstance(i, int) or isinstance(i, bool) or i < 0:
            raise _bad("i", "expected an integer >= 0")
        _check_number(msg["t"], "t")
        _check_vec3(msg["root"], "root")
        q = msg["q"]
        if not isinstance(q, list) or len(q) % 4 != 0 or not q:
            raise _bad("q", "expected a flat list of 4 values per joint")
        for k, v in enumerate(q):
            _check_number(v, f"q[{k}]")


def _check_str(msg: dict, name: str) -> None:
    if not isinstance(msg[name], str):
        raise _bad(name, "expected a string")


def _check_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _bad(path, "expected a number")
    try:
        as_float = float(value)
    except OverflowError:
        raise _bad(path, "must be finite") from None
    if not math.isfinite(as_float):
        raise _bad(path, "must be finite")
    return as_float


def _check_vec3(value, path: str) -> None:
    if not isinstance(value, list) or len(value) != 3:
        raise _bad(path, "expected an array of 3 numbers")
    for k, v in enumerate(value):
        _check_number(v, f"{path}[{k}]")


def _check_joints(value) -> None:
    if not isinstance(value, list) or not value:
        raise _bad("joints", "expected a non-empty array")
    for k, entry in enumerate(value):
        path = f"joints[{k}]"
        if not isinstance(entry, dict):
            raise _bad(path, "expected an object")
        for key in entry:
            if key not in ("name", "parent", "offset", "end"):
                raise _bad(f"{path}.{key}", "unknown field")
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise _bad(f"{path}.name", "expected a non-empty string")
        parent = entry.get("parent")
        if not isinstance(parent, int) or isinstance(parent, bool) or parent < -1:
            raise _bad(f"{path}.parent", "expected an integer >= -1")
        _check_vec3(entry.get("offset"), f"{path}.offset")
        if "end" in entry and not isinstance(entry["end"], bool):
            raise _bad(f"{path}.end", "expected a boolean")
