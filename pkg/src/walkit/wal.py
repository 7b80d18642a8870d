"""WAL file lifecycle: create or open, durable appends, close.

A log file is exactly a concatenation of frames in one of two formats; no
header, no footer. Every append returns only after the bytes have passed a
full data+metadata synchronization barrier (``os.fsync``), so acknowledged
records survive a crash.
"""

from __future__ import annotations

import enum
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

from . import codec_binary, codec_text
from .errors import UsageError
from .records import check_schema


class LogFormat(enum.Enum):
    """On-disk record format of a WAL file."""

    TEXT = "text"
    BINARY = "binary"


@dataclass(frozen=True)
class AppendReceipt:
    """Acknowledgement of a durable append."""

    records_written: int
    bytes_written: int
    durable: bool = True


class LogHandle:
    """An open, append-only WAL file bound to one format and record schema.

    Handles are single-writer: appends are serialized on an internal lock,
    so interleaved frame bytes are impossible, but callers should still
    treat a handle as owned by one writer at a time. A handle never
    rewrites or truncates bytes before its acknowledged write position.

    Use :func:`open_log` to obtain a handle; it works as a context manager.
    """

    def __init__(self, path: Path, format: LogFormat, schema: type,
                 file: Any, position: int, encode: Callable[[Any], bytes]):
        self._path = path
        self._format = format
        self._schema = schema
        self._file = file
        self._position = position
        self._encode = encode
        self._closed = False
        self._lock = threading.Lock()

    @property
    def path(self) -> Path:
        return self._path

    @property
    def format(self) -> LogFormat:
        return self._format

    @property
    def schema(self) -> type:
        return self._schema

    @property
    def write_position(self) -> int:
        """Byte offset of the end of the last acknowledged append."""
        return self._position

    @property
    def closed(self) -> bool:
        return self._closed

    def append(self, record: Any) -> AppendReceipt:
        """Append one record and flush it to stable storage before returning.

        On an I/O error the handle stays open and usable and the same
        record may be retried; an unacknowledged torn tail, if one was
        left behind, is removed on a best-effort basis.
        """
        return self._write_frames((record,))

    def append_batch(self, records: Iterable[Any]) -> AppendReceipt:
        """Append several records with a single durable flush after the last.

        The on-disk bytes are identical to consecutive ``append`` calls.
        The batch is not atomic: a crash mid-batch can persist a prefix.
        """
        records = list(records)
        if not records:
            raise UsageError("append_batch requires at least one record")
        return self._write_frames(records)

    def close(self) -> None:
        """Release the file. All acknowledged records remain durable."""
        with self._lock:
            if self._closed:
                raise UsageError("log handle is already closed")
            self._closed = True
            self._file.close()

    def _write_frames(self, records: list | tuple) -> AppendReceipt:
        with self._lock:
            if self._closed:
                raise UsageError("log handle is closed")
            for record in records:
                if not isinstance(record, self._schema):
                    raise UsageError(
                        f"record {record!r} is not an instance of the bound schema "
                        f"{self._schema.__name__}"
                    )
            data = b"".join(self._encode(record) for record in records)
            try:
                view = memoryview(data)
                while view:
                    written = self._file.write(view)
                    view = view[written:]
                os.fsync(self._file.fileno())
            except OSError:
                self._drop_torn_tail()
                raise
            self._position += len(data)
            return AppendReceipt(records_written=len(records), bytes_written=len(data))

    def _drop_torn_tail(self) -> None:
        # Best effort: restore the file to the last acknowledged position so
        # a retried append lands where the failed one did.
        try:
            os.ftruncate(self._file.fileno(), self._position)
        except OSError:
            pass

    def __enter__(self) -> "LogHandle":
        return self

    def __exit__(self, *exc_info) -> None:
        if not self._closed:
            self.close()

    def __repr__(self) -> str:
        state = "closed" if self._closed else f"open @{self._position}"
        return (f"<LogHandle {self._path} format={self._format.value} "
                f"schema={self._schema.__name__} {state}>")


def open_log(path: str | os.PathLike, format: LogFormat, schema: type) -> LogHandle:
    """Create or open a WAL file for appending.

    The file is created empty when absent; existing contents are never
    touched and the handle is positioned at end of file. The format and
    schema are not sniffed from existing contents: a mismatch surfaces at
    replay time as a decode error.
    """
    if not isinstance(format, LogFormat):
        raise UsageError(f"format must be a LogFormat, got {format!r}")
    check_schema(schema)
    if format is LogFormat.TEXT:
        def encode(record, _schema=schema):
            return codec_text.encode_text(record, _schema)
    else:
        def encode(record, _schema=schema):
            return codec_binary.encode_binary(record, _schema)
    file = open(path, "ab", buffering=0)
    try:
        position = file.seek(0, os.SEEK_END)
    except OSError:
        file.close()
        raise
    return LogHandle(Path(path), format, schema, file, position, encode)
