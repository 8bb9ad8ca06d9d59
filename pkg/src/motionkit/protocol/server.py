"""Reference receiving server.

Accepts any number of concurrent controller connections; each connection
owns an independent :class:`~motionkit.protocol.session.SessionState`.
With a record directory set, the frames received per namespace are written
out as canonical clips when the session ends (on bye or disconnect). The
recorded frame time is recovered from the frame ``t`` metadata, falling
back to 1/30 s when a namespace has fewer than two frames.

Malformed lines are answered with E_BADMSG and the connection stays up
(line framing survives a bad line); only an oversized line kills the
connection, because framing cannot be trusted past it.
"""

from __future__ import annotations

import logging
import socketserver
import threading
from pathlib import Path

from ..errors import ProtocolError
from ..rotations import Rotation
from ..skeleton import Joint, MotionClip, Pose, Skeleton
from .messages import DEFAULT_PORT, MAX_LINE, decode, encode
from .session import SessionState, session_step

log = logging.getLogger(__name__)

FALLBACK_FRAME_TIME = 1.0 / 30.0


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        owner: StreamServer = self.server.owner  # type: ignore[attr-defined]
        state = SessionState()
        skeletons: dict[str, tuple] = {}
        frames: dict[str, list] = {}
        peer = self.client_address
        log.debug("connection from %s", peer)
        try:
            while True:
                line = self.rfile.readline(MAX_LINE + 1)
                if not line:
                    break
                if len(line) > MAX_LINE:
                    self._send({"type": "error", "code": "E_BADMSG",
                                "message": f"line exceeds {MAX_LINE} bytes"})
                    break
                if not line.endswith(b"\n"):
                    break  # EOF in the middle of a line; nothing trustworthy left
                try:
                    message = decode(line)
                except ProtocolError as exc:
                    self._send({"type": "error", "code": exc.code, "message": exc.reason})
                    continue
                state, reply = session_step(state, message)
                accepted = reply is None or reply.get("type") != "error"
                if accepted and message["type"] == "skeleton":
                    skeletons[message["ns"]] = tuple(message["joints"])
                elif accepted and message["type"] == "frame":
                    frames.setdefault(message["ns"], []).append(
                        (message["i"], message["t"], message["root"], message["q"])
                    )
                if reply is not None:
                    self._send(reply)
                if state.closed:
                    break
        except (ConnectionError, TimeoutError, OSError) as exc:
            log.debug("connection %s dropped: %s", peer, exc)
        finally:
            if owner.record_dir is not None:
                for ns, received in frames.items():
                    if ns in skeletons and received:
                        owner._record(ns, skeletons[ns], received)
            log.debug("connection %s closed", peer)

    def _send(self, message: dict) -> None:
        self.wfile.write(encode(message))
        self.wfile.flush()


class _ThreadingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class StreamServer:
    """Bindable, stoppable server wrapper usable from tests and the CLI."""

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT,
                 record_dir: str | Path | None = None):
        self.record_dir = Path(record_dir) if record_dir is not None else None
        if self.record_dir is not None:
            self.record_dir.mkdir(parents=True, exist_ok=True)
        try:
            self._server = _ThreadingServer((host, port), _Handler)
        except OSError as exc:
            raise ProtocolError("E_BIND", f"cannot bind {host}:{port} ({exc.strerror or exc})") from None
        self._server.owner = self  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None
        self._record_lock = threading.Lock()
        self.recorded: list[Path] = []

    @property
    def address(self) -> tuple[str, int]:
        """Actual bound (host, port); useful after binding port 0."""
        host, port = self._server.server_address[:2]
        return host, port

    def start(self) -> "StreamServer":
        """Serve on a background thread (tests); returns self."""
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        """Serve on the calling thread until shutdown() or interrupt."""
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        self._server.server_close()

    def __enter__(self) -> "StreamServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.shutdown()

    # -- recording -------------------------------------------------------

    def _record(self, ns: str, wire_joints: tuple, received: list) -> None:
        try:
            skeleton = skeleton_from_wire(wire_joints)
            clip = clip_from_frames(skeleton, received)
        except (ValueError, ArithmeticError) as exc:
            log.error("not recording namespace %r: %s", ns, exc)
            return
        from ..formats import to_canonical

        with self._record_lock:
            target = self.record_dir / f"{ns}.canon"
            n = 2
            while target.exists():
                target = self.record_dir / f"{ns}_{n}.canon"
                n += 1
            target.write_text(to_canonical(skeleton, clip), encoding="utf-8")
            self.recorded.append(target)
        log.info("recorded %d frames for namespace %r to %s", len(clip), ns, target)


def skeleton_from_wire(wire_joints) -> Skeleton:
    """Rebuild a Skeleton from the wire joint entries.

    The wire format carries no channel layout, so the default layout is
    assigned (root translation + ZXY rotation order), same as the
    canonical format.
    """
    joints = []
    for k, entry in enumerate(wire_joints):
        is_end = bool(entry.get("end", False))
        if is_end:
            channels: tuple[str, ...] = ()
        elif k == 0:
            channels = ("TX", "TY", "TZ", "RZ", "RX", "RY")
        else:
            channels = ("RZ", "RX", "RY")
        joints.append(
            Joint(
                entry["name"],
                None if entry["parent"] == -1 else entry["parent"],
                tuple(float(v) for v in entry["offset"]),
                channels,
                is_end_site=is_end,
            )
        )
    return Skeleton(tuple(joints), name=joints[0].name)


def clip_from_frames(skeleton: Skeleton, received: list) -> MotionClip:
    """Turn recorded (i, t, root, q) tuples into a clip.

    Wire quaternions are renormalized defensively; the frame time is the
    mean t spacing when at least two frames arrived.
    """
    poses = []
    for _, _, root, q in received:
        rotations = tuple(
            Rotation.normalized(q[4 * j], q[4 * j + 1], q[4 * j + 2], q[4 * j + 3])
            for j in range(len(q) // 4)
        )
        poses.append(Pose(tuple(float(v) for v in root), rotations))
    if len(received) >= 2:
        spacing = (received[-1][1] - received[0][1]) / (len(received) - 1)
        frame_time = spacing if spacing > 0 else FALLBACK_FRAME_TIME
    else:
        frame_time = FALLBACK_FRAME_TIME
    return MotionClip(skeleton, frame_time, tuple(poses))


def serve(address: tuple[str, int], record_dir: str | Path | None = None) -> StreamServer:
    """Bind and return a server ready to run (CLI calls serve_forever on it)."""
    host, port = address
    return StreamServer(host=host, port=port, record_dir=record_dir)
