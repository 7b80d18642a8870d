"""Ordered, fail-stop replay of WAL files.

Replay yields records strictly in file order and halts permanently at the
first undecodable frame: records past a bad frame are never yielded, even
when they are individually intact, because later state changes depend on
earlier ones. The cursor reads lazily through a bounded buffer, so memory
use is independent of file size.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, BinaryIO

from . import codec_binary, codec_text
from .errors import DecodeError, TruncatedFrame, UsageError
from .wal import LogFormat

DEFAULT_BUFFER_SIZE = codec_binary.DEFAULT_BUFFER_SIZE


class TerminalKind(enum.Enum):
    """Why a replay stopped."""

    CLEAN_END = "clean_end"
    CORRUPT = "corrupt"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class TerminalStatus:
    """Final state of a finished replay.

    ``offset`` is the byte offset of the frame that failed (None for a
    clean end); ``cause`` is a human-readable reason.
    """

    kind: TerminalKind
    records_recovered: int
    offset: int | None = None
    cause: str | None = None


class ReplayCursor:
    """Lazy iterator over the records of one WAL file or stream.

    Iterate to receive records; once iteration stops, :attr:`terminal`
    reports whether the input ended cleanly, was truncated mid-frame, or
    was corrupt. A finished cursor never yields again. Cursors are
    single-consumer but may be handed between threads.
    """

    def __init__(
        self,
        stream: BinaryIO,
        format: LogFormat,
        schema: type | None,
        *,
        buffer_size: int = DEFAULT_BUFFER_SIZE,
        owns_stream: bool = False,
    ):
        if not isinstance(format, LogFormat):
            raise UsageError(f"format must be a LogFormat, got {format!r}")
        if format is LogFormat.TEXT:
            frames = codec_text.iter_text_frames(stream, schema, buffer_size=buffer_size)
        else:
            frames = codec_binary.iter_binary_frames(stream, schema, buffer_size=buffer_size)
        self._stream = stream
        self._owns_stream = owns_stream
        self._frames = frames
        self._terminal: TerminalStatus | None = None
        self._count = 0
        self._next_offset = 0

    @property
    def terminal(self) -> TerminalStatus | None:
        """Terminal status, or None while records may still follow."""
        return self._terminal

    @property
    def records_recovered(self) -> int:
        return self._count

    @property
    def next_offset(self) -> int:
        """Byte offset just past the last yielded frame."""
        return self._next_offset

    def __iter__(self) -> "ReplayCursor":
        return self

    def __next__(self) -> Any:
        if self._terminal is not None:
            raise StopIteration
        try:
            record, start, end = next(self._frames)
        except StopIteration:
            self._finish(TerminalKind.CLEAN_END)
            raise
        except TruncatedFrame as exc:
            self._finish(TerminalKind.TRUNCATED, exc.offset, str(exc))
            raise StopIteration from None
        except DecodeError as exc:
            self._finish(TerminalKind.CORRUPT, exc.offset, str(exc))
            raise StopIteration from None
        except OSError as exc:
            self._finish(TerminalKind.CORRUPT, self._next_offset, f"I/O failure: {exc}")
            raise StopIteration from None
        self._count += 1
        self._next_offset = end
        return record

    def _finish(self, kind: TerminalKind, offset: int | None = None,
                cause: str | None = None) -> None:
        self._terminal = TerminalStatus(
            kind=kind, records_recovered=self._count, offset=offset, cause=cause
        )
        self.close()

    def close(self) -> None:
        """Release the underlying stream if this cursor owns it."""
        if self._owns_stream and not self._stream.closed:
            self._stream.close()

    def __enter__(self) -> "ReplayCursor":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def replay(
    path: str,
    format: LogFormat,
    schema: type | None,
    *,
    buffer_size: int = DEFAULT_BUFFER_SIZE,
) -> ReplayCursor:
    """Open *path* for replay and return a cursor over its records.

    No frame bytes are consumed until the cursor is first advanced. Pass
    ``schema=None`` to decode without schema validation (binary frames are
    still checksum-verified).
    """
    stream = open(path, "rb")
    return ReplayCursor(
        stream, format, schema, buffer_size=buffer_size, owns_stream=True
    )
