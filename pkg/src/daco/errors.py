"""Exception hierarchy shared across the engine."""


class DacoError(Exception):
    """Base class for all engine errors."""


class SceneError(DacoError):
    """Scene file is malformed or violates a graph invariant."""


class UnknownViewpointError(SceneError):
    """A viewpoint id is not present in the scene graph."""


class UnreachableError(SceneError):
    """No path exists between the two requested viewpoints."""


class AnnotationError(DacoError):
    """Top-down annotation failed (missing coordinate, out-of-bounds marker)."""


class BackendError(DacoError):
    """Base class for chat-backend failures."""


class TransportError(BackendError):
    """Network-level failure that persisted through the retry budget."""


class HTTPStatusError(BackendError):
    """Non-2xx HTTP response from the remote endpoint."""

    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body}")
        self.status = status
        self.body = body


class AuthenticationError(HTTPStatusError):
    """401/403 from the remote endpoint."""


class OracleMissError(BackendError):
    """The scripted backend has no entry for the requested call key."""


class ParseError(DacoError):
    """A model response could not be parsed into the expected structure."""


class ProtocolError(DacoError):
    """The agent protocol was violated (e.g. prior plan leaked into a replan request)."""


class ConfigError(DacoError):
    """Invalid run configuration."""
