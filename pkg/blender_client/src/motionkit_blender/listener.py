"""Socket front end: one I/O thread feeding a queue the main thread drains.

The network thread owns the socket and the protocol session and never
touches scene data. Validated updates cross over through ``updates`` (the
only shared structure); ``drain`` applies them on whichever thread the DCC
calls it from, which must be the main thread when a real scene is attached.
"""

from __future__ import annotations

import queue
import socket
import threading

from . import protocol, scene


class LiveLink:
    def __init__(self, host: str = "127.0.0.1", port: int = protocol.DEFAULT_PORT,
                 record: bool = False):
        self.host = host
        self.port = port
        self.record = record
        self.updates: queue.Queue = queue.Queue()
        self.bindings: dict[str, scene.CharacterBinding] = {}
        self.session_done = False
        self._sock: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()

    # -- network thread side -------------------------------------------------

    def start(self) -> None:
        """Bind and start accepting; raises OSError with a readable message
        when the port is taken."""
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((self.host, self.port))
        except OSError as exc:
            sock.close()
            raise OSError(f"cannot bind {self.host}:{self.port} ({exc.strerror or exc})") from exc
        sock.listen(1)
        sock.settimeout(0.2)
        self.port = sock.getsockname()[1]
        self._sock = sock
        self._thread = threading.Thread(
            target=self._serve, name="motionkit-live-link", daemon=True
        )
        self._thread.start()

    def _serve(self) -> None:
        # one controller at a time; later connections wait in the backlog
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            with conn:
                self._session(conn)

    def _session(self, conn: socket.socket) -> None:
        conn.settimeout(0.2)
        session = protocol.ServerSession()
        self.updates.put(("session",))
        buffer = b""
        while not self._stop.is_set() and not session.closed:
            newline = buffer.find(b"\n")
            while newline < 0:
                if len(buffer) > protocol.MAX_LINE:
                    self._send(conn, protocol.encode_error(
                        "E_BADMSG", f"line: exceeds {protocol.MAX_LINE} bytes"))
                    return
                try:
                    chunk = conn.recv(65536)
                except socket.timeout:
                    if self._stop.is_set():
                        return
                    continue
                except OSError:
                    return
                if not chunk:
                    return
                buffer += chunk
                newline = buffer.find(b"\n")
            line, buffer = buffer[:newline + 1], buffer[newline + 1:]
            replies, events = session.feed_line(line)
            for event in events:
                self.updates.put(event)
            for reply in replies:
                if not self._send(conn, reply):
                    return

    @staticmethod
    def _send(conn: socket.socket, payload: bytes) -> bool:
        try:
            conn.sendall(payload)
            return True
        except OSError:
            return False

    # -- main thread side ----------------------------------------------------

    def drain(self, limit: int | None = None) -> int:
        """Apply queued scene updates; returns how many were handled."""
        handled = 0
        while limit is None or handled < limit:
            try:
                event = self.updates.get_nowait()
            except queue.Empty:
                break
            kind = event[0]
            if kind == "session":
                # armatures from earlier sessions stay in the scene;
                # a fresh controller binds fresh objects
                self.bindings = {}
                self.session_done = False
            elif kind == "build":
                _, ns, joints = event
                self.bindings[ns] = scene.build_armature(ns, joints)
            elif kind == "frame":
                _, ns, index, root, quats = event
                binding = self.bindings.get(ns)
                if binding is not None:
                    scene.apply_frame(binding, index, root, quats, record=self.record)
            elif kind == "done":
                self.session_done = True
            handled += 1
        return handled

    def tick(self) -> float:
        """Timer callback: drain, then ask to run again."""
        self.drain()
        return 1.0 / 60.0

    def stop(self) -> None:
        self._stop.set()
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
