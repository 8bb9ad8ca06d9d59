"""Streaming controller client.

``play`` performs the full conversation against a receiving server:
hello, register, skeleton, then one frame message per pose paced on
absolute deadlines (frame i goes out at start + i * period, so timing
errors never accumulate), then play_done and bye. Any error reply aborts
the stream immediately with its wire code.
"""

from __future__ import annotations

import select
import socket
import time
from dataclasses import dataclass

from ..errors import ProtocolError
from ..skeleton import MotionClip, Skeleton
from .messages import DEFAULT_PORT, MAX_LINE, NAMESPACE_RE, decode, encode

_CONTROL_TIMEOUT = 10.0  # seconds to wait for an ack


@dataclass(frozen=True)
class PlaySummary:
    namespace: str
    frames_sent: int
    duration: float  # wall seconds spent streaming frames


def parse_address(text: str, default_port: int = DEFAULT_PORT) -> tuple[str, int]:
    """Parse 'host:port', 'host', or ':port' ('' means 127.0.0.1)."""
    host, sep, port_text = text.rpartition(":")
    if not sep:
        host, port_text = text, ""
    host = host or "127.0.0.1"
    if not port_text:
        return host, default_port
    try:
        port = int(port_text)
    except ValueError:
        raise ProtocolError("E_CONN", f"bad port in address {text!r}") from None
    if not 0 < port < 65536:
        raise ProtocolError("E_CONN", f"port out of range in address {text!r}")
    return host, port


def wire_skeleton(skeleton: Skeleton) -> list[dict]:
    """The skeleton message's joint entries for a Skeleton."""
    entries = []
    for joint in skeleton.joints:
        entry = {
            "name": joint.name,
            "parent": -1 if joint.parent is None else joint.parent,
            "offset": [float(v) for v in joint.offset],
        }
        if joint.is_end_site:
            entry["end"] = True
        entries.append(entry)
    return entries


def frame_payload(clip: MotionClip, frame: int, index: int, t: float, ns: str) -> dict:
    pose = clip.frames[frame]
    q: list[float] = []
    for rot in pose.rotations:
        q.extend((rot.w, rot.x, rot.y, rot.z))
    return {
        "type": "frame",
        "ns": ns,
        "i": index,
        "t": t,
        "root": [float(v) for v in pose.root_translation],
        "q": q,
    }


class _Connection:
    """Blocking line-oriented connection with non-blocking poll support."""

    def __init__(self, address: tuple[str, int], timeout: float):
        try:
            self.sock = socket.create_connection(address, timeout=timeout)
        except OSError as exc:
            raise ProtocolError(
                "E_CONN", f"cannot connect to {address[0]}:{address[1]} ({exc})"
            ) from None
        self.buffer = b""

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def send(self, message: dict) -> None:
        try:
            self.sock.sendall(encode(message))
        except OSError as exc:
            raise ProtocolError("E_CONN", f"connection lost while sending ({exc})") from None

    def read_message(self, timeout: float) -> dict:
        """Block up to timeout for one complete line."""
        deadline = time.monotonic() + timeout
        while b"\n" not in self.buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError("E_CONN", "timed out waiting for a reply")
            if len(self.buffer) > MAX_LINE:
                raise ProtocolError("E_BADMSG", "server sent an oversized line")
            self.sock.settimeout(remaining)
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                raise ProtocolError("E_CONN", "timed out waiting for a reply") from None
            except OSError as exc:
                raise ProtocolError("E_CONN", f"connection lost ({exc})") from None
            if not chunk:
                raise ProtocolError("E_CONN", "server closed the connection")
            self.buffer += chunk
        line, _, self.buffer = self.buffer.partition(b"\n")
        return decode(line + b"\n")

    def poll_message(self) -> dict | None:
        """Return a message if one is already waiting; never blocks."""
        while b"\n" not in self.buffer:
            readable, _, _ = select.select([self.sock], [], [], 0)
            if not readable:
                return None
            try:
                chunk = self.sock.recv(65536)
            except OSError as exc:
                raise ProtocolError("E_CONN", f"connection lost ({exc})") from None
            if not chunk:
                raise ProtocolError("E_CONN", "server closed the connection")
            self.buffer += chunk
        line, _, self.buffer = self.buffer.partition(b"\n")
        return decode(line + b"\n")


def _expect_ack(conn: _Connection, target: str) -> None:
    reply = conn.read_message(_CONTROL_TIMEOUT)
    if reply["type"] == "error":
        raise ProtocolError(reply["code"], reply["message"])
    if reply["type"] != "ack" or reply["for"] != target:
        raise ProtocolError("E_PROTO", f"expected ack for {target!r}, got {reply!r}")


def _check_for_error(conn: _Connection) -> None:
    message = conn.poll_message()
    if message is None:
        return
    if message["type"] == "error":
        raise ProtocolError(message["code"], message["message"])
    # stray acks are tolerated; anything else is a server bug
    if message["type"] != "ack":
        raise ProtocolError("E_PROTO", f"unexpected server message {message!r}")


def play(
    clip: MotionClip,
    address: tuple[str, int] | str,
    namespace: str,
    fps: float | None = None,
    loop: bool = False,
    connect_timeout: float = 5.0,
) -> PlaySummary:
    """Stream a clip to a receiving server.

    With ``loop`` set, the clip repeats with continuing frame indices until
    interrupted (KeyboardInterrupt ends the stream gracefully with bye).
    Returns how many frame messages went out and the wall time spent
    streaming them.
    """
    if not NAMESPACE_RE.match(namespace):
        raise ProtocolError("E_BADMSG", "namespace must match [A-Za-z0-9_]{1,64}")
    if isinstance(address, str):
        address = parse_address(address)
    if fps is not None and not fps > 0:
        raise ValueError("fps override must be positive")
    period = (1.0 / fps) if fps else clip.frame_time

    conn = _Connection(address, connect_timeout)
    try:
        conn.send({"type": "hello", "version": 1})
        _expect_ack(conn, "hello")
        conn.send({"type": "register", "ns": namespace})
        _expect_ack(conn, "register")
        conn.send({"type": "skeleton", "ns": namespace, "joints": wire_skeleton(clip.skeleton)})
        _expect_ack(conn, "skeleton")

        index = 0
        start = time.monotonic()
        interrupted = False
        try:
            while True:
                for frame in range(len(clip.frames)):
                    deadline = start + index * period
                    delay = deadline - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
                    t = index * period
                    conn.send(frame_payload(clip, frame, index, t, namespace))
                    index += 1
                    _check_for_error(conn)
                if not loop:
                    break
        except KeyboardInterrupt:
            interrupted = True
        duration = time.monotonic() - start

        conn.send({"type": "play_done", "ns": namespace})
        _expect_ack(conn, "play_done")
        conn.send({"type": "bye"})
        _expect_ack(conn, "bye")
        if interrupted:
            raise KeyboardInterrupt
        return PlaySummary(namespace=namespace, frames_sent=index, duration=duration)
    finally:
        conn.close()
