"""Shared exception hierarchy.

Every failure the package reports deliberately belongs to one of these
classes so the CLI can map them onto stable exit codes.
"""


class MmgpError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MmgpError):
    """Caller supplied arguments that violate an operation's preconditions."""


class CorruptDataError(MmgpError):
    """Encoded data failed validation while being decoded."""


class UnsupportedFormatError(MmgpError):
    """Container magic/version/mode is not one this build understands."""


class AlreadyExistsError(MmgpError):
    """Attempt to register a resource under a name already in use."""


class DiscoveryTimeoutError(MmgpError):
    """No super node acknowledged within the configured retries."""


class ConnectFailedError(MmgpError):
    """Every candidate endpoint failed during connection establishment."""

    def __init__(self, message, attempts=None):
        super().__init__(message)
        self.attempts = list(attempts or [])


class AuthFailedError(MmgpError):
    """Handshake credential check failed; the peer refused the session."""


class TransferAbortedError(MmgpError):
    """Peer went silent mid-transfer; carries the progress made so far."""

    def __init__(self, message, bytes_acked=0):
        super().__init__(message)
        self.bytes_acked = bytes_acked


class ProtocolViolationError(MmgpError):
    """Peer sent something no conforming implementation may send."""
