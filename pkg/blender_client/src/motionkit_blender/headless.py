"""Batch mode: serve one controller session to completion without any UI.

Runs identically inside the DCC's background mode (where the calling script
owns the main thread) and under the test harness. The caller's thread plays
the role of the main thread: it pumps the drain loop, so scene mutations
happen here and nowhere else.
"""

from __future__ import annotations

import time

from . import protocol
from .listener import LiveLink


def serve_once(host: str = "127.0.0.1", port: int = protocol.DEFAULT_PORT,
               record: bool = False, timeout: float = 60.0) -> dict:
    """Listen, apply one full session, return the character bindings."""
    link = LiveLink(host=host, port=port, record=record)
    link.start()
    print(f"live link listening on {link.host}:{link.port}")
    try:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            link.drain()
            if link.session_done and link.updates.empty():
                break
            time.sleep(0.002)
        link.drain()
        for ns, binding in sorted(link.bindings.items()):
            print(f"  {ns}: {len(binding)} bones, last frame {binding.last_index}")
        return dict(link.bindings)
    finally:
        link.stop()
