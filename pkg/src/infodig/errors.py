"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all engine-raised errors."""


class ProtocolError(EngineError):
    """A core-protocol invariant was violated (bad ids, index gaps, empty input)."""


class RoutingError(EngineError):
    """Message could not be delivered (unknown recipient, bad kind)."""


class GatewayError(EngineError):
    """Model client failed: bad profile, script exhausted, unusable response."""


class TransportError(EngineError):
    """Network-level failure. `retriable` hints whether a retry makes sense."""

    def __init__(self, message: str, retriable: bool = True):
        super().__init__(message)
        self.retriable = retriable


class LocatorError(EngineError):
    """A browser locator did not resolve; carries nearest candidates."""

    def __init__(self, message: str, candidates: list[str] | None = None):
        super().__init__(message)
        self.candidates = candidates or []


class DocumentError(EngineError):
    """Document could not be parsed."""


class UnsupportedFormatError(DocumentError):
    """File media kind is not one the reader supports."""
