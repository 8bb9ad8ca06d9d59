"""Exception types shared across the toolkit."""


class MotionKitError(Exception):
    """Base class for all toolkit-specific errors."""


class ParseError(MotionKitError, ValueError):
    """A document (BVH, ASF/AMC, canonical clip, config, model file) is malformed.

    ``line`` is the 1-based line number when known, ``path`` a dotted/indexed
    field path for structured documents (e.g. ``frames[3].quats[2]``).
    """

    def __init__(self, reason: str, *, line: int | None = None, path: str | None = None):
        self.reason = reason
        self.line = line
        self.path = path
        loc = ""
        if line is not None:
            loc = f"line {line}: "
        elif path is not None:
            loc = f"{path}: "
        super().__init__(f"{loc}{reason}")


class NumericalError(MotionKitError, ArithmeticError):
    """A numerical procedure failed (singular system, non-finite result)."""


class ProtocolError(MotionKitError):
    """Streaming protocol failure, carrying the wire-level error code."""

    def __init__(self, code: str, message: str):
        self.code = code
        self.reason = message
        super().__init__(f"{code}: {message}")
