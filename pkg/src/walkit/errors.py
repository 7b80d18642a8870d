"""Exception types shared across the library.

Decode errors double as terminal-status causes during replay: they carry
the byte offset of the frame that failed, never a position inside it.
"""

from __future__ import annotations


class WalError(Exception):
    """Base class for all walkit errors."""


class UsageError(WalError):
    """An operation was invoked in a state or with arguments it does not support."""


class DecodeError(WalError):
    """One frame could not be decoded.

    Attributes:
        offset: byte offset of the start of the failing frame.
    """

    def __init__(self, offset: int, message: str):
        super().__init__(f"{message} (frame at byte {offset})")
        self.offset = offset


class MalformedValue(DecodeError):
    """Frame bytes are not a well-formed value of the expected wire format."""


class ChecksumMismatch(DecodeError):
    """Stored checksum does not match the checksum of the payload bytes."""

    def __init__(self, offset: int, stored: int, computed: int):
        super().__init__(
            offset,
            f"checksum mismatch: stored 0x{stored:08X}, computed 0x{computed:08X}",
        )
        self.stored = stored
        self.computed = computed


class SchemaMismatch(DecodeError):
    """Frame decodes to a value that does not conform to the bound record schema."""


class TruncatedFrame(DecodeError):
    """Input ended in the middle of a frame."""
