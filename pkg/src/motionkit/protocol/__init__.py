"""Newline-delimited TCP pose-streaming protocol, version 1.

``messages`` is the codec, ``session`` the pure server-side state machine,
``server`` the reference receiving server, ``client`` the streaming
controller.
"""

from .client import PlaySummary, parse_address, play
from .messages import DEFAULT_PORT, MAX_LINE, PROTOCOL_VERSION, decode, encode
from .server import StreamServer, serve
from .session import NamespaceState, SessionState, session_step

__all__ = [
    "DEFAULT_PORT",
    "MAX_LINE",
    "PROTOCOL_VERSION",
    "decode",
    "encode",
    "session_step",
    "SessionState",
    "NamespaceState",
    "StreamServer",
    "serve",
    "play",
    "PlaySummary",
    "parse_address",
]
