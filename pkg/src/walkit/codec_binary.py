"""MessagePack record frames with CRC32 trailers.

Wire format, bit exact::

    frame := msgpack(record) ++ msgpack_uint(crc32(msgpack(record)))
    file  := frame*

The checksum covers exactly the payload bytes, is computed with the
CRC-32/ISO-HDLC parameterization (polynomial 0x04C11DB7 reflected, init and
final xor 0xFFFFFFFF), and is written in shortest-form MessagePack unsigned
encoding. The reader accepts any integer encoding that holds a non-negative
value. Frames carry no length prefix: MessagePack values are self-delimiting.
"""

from __future__ import annotations

import zlib
from functools import lru_cache
from typing import Any, BinaryIO, Iterator

import msgspec

from .errors import (
    ChecksumMismatch,
    MalformedValue,
    SchemaMismatch,
    TruncatedFrame,
    UsageError,
)

DEFAULT_BUFFER_SIZE = 64 * 1024

_MISS = object()


def crc32(data: bytes | bytearray | memoryview) -> int:
    """CRC-32/ISO-HDLC of *data* as an unsigned 32-bit integer."""
    return zlib.crc32(data)


@lru_cache(maxsize=None)
def _decoder(schema: type | None) -> msgspec.msgpack.Decoder:
    if schema is None:
        return msgspec.msgpack.Decoder()
    return msgspec.msgpack.Decoder(schema)


def encode_record(record: Any) -> bytes:
    """Serialize one record to MessagePack payload bytes, without checksum."""
    return msgspec.msgpack.encode(record)


def encode_binary(record: Any, schema: type | None = None) -> bytes:
    """Encode one record as a complete frame: payload plus CRC32 trailer.

    With *schema* given, the payload is validated against it before the
    frame is returned, so a non-conforming record never reaches the file.
    """
    try:
        payload = msgspec.msgpack.encode(record)
    except (msgspec.EncodeError, TypeError) as exc:
        raise UsageError(f"record is not encodable: {exc}") from exc
    if schema is not None:
        try:
            _decoder(schema).decode(payload)
        except (msgspec.ValidationError, msgspec.DecodeError) as exc:
            raise UsageError(f"record does not conform to schema: {exc}") from exc
    return payload + msgspec.msgpack.encode(zlib.crc32(payload))


# ---------------------------------------------------------------------------
# MessagePack value scanning
# ---------------------------------------------------------------------------

class _Incomplete(Exception):
    """More bytes are required to finish the current value."""


class _Malformed(Exception):
    def __init__(self, offset: int):
        self.offset = offset


# token sizes keyed by leading byte, for everything that is not a fix-family tag
_FIXED_SIZE = {
    0xC0: 1, 0xC2: 1, 0xC3: 1,
    0xCA: 5, 0xCB: 9,
    0xCC: 2, 0xCD: 3, 0xCE: 5, 0xCF: 9,
    0xD0: 2, 0xD1: 3, 0xD2: 5, 0xD3: 9,
    0xD4: 3, 0xD5: 4, 0xD6: 6, 0xD7: 10, 0xD8: 18,
}
_BLOB_WIDTH = {0xC4: 1, 0xC5: 2, 0xC6: 4, 0xD9: 1, 0xDA: 2, 0xDB: 4}
_EXT_WIDTH = {0xC7: 1, 0xC8: 2, 0xC9: 4}
_ARRAY_WIDTH = {0xDC: 2, 0xDD: 4}
_MAP_WIDTH = {0xDE: 2, 0xDF: 4}

_UINT_WIDTH = {0xCC: 1, 0xCD: 2, 0xCE: 4, 0xCF: 8}
_INT_WIDTH = {0xD0: 1, 0xD1: 2, 0xD2: 4, 0xD3: 8}


def _scan(data, pos: int, end: int) -> int:
    """End offset of the single MessagePack value starting at *pos*.

    Walks the value without decoding it. Raises _Incomplete when *data*
    ends before the value does, _Malformed on a reserved tag byte.
    """
    need = 1
    while need:
        if pos >= end:
            raise _Incomplete
        tag = data[pos]
        need -= 1
        if tag <= 0x7F or tag >= 0xE0:
            pos += 1
        elif tag <= 0x8F:
            pos += 1
            need += (tag & 0x0F) * 2
        elif tag <= 0x9F:
            pos += 1
            need += tag & 0x0F
        elif tag <= 0xBF:
            pos += 1 + (tag & 0x1F)
        elif tag == 0xC1:
            raise _Malformed(pos)
        else:
            size = _FIXED_SIZE.get(tag)
            if size is not None:
                pos += size
            elif tag in _BLOB_WIDTH:
                w = _BLOB_WIDTH[tag]
                if pos + 1 + w > end:
                    raise _Incomplete
                pos += 1 + w + int.from_bytes(data[pos + 1 : pos + 1 + w], "big")
            elif tag in _EXT_WIDTH:
                w = _EXT_WIDTH[tag]
                if pos + 1 + w > end:
                    raise _Incomplete
                pos += 2 + w + int.from_bytes(data[pos + 1 : pos + 1 + w], "big")
            elif tag in _ARRAY_WIDTH:
                w = _ARRAY_WIDTH[tag]
                if pos + 1 + w > end:
                    raise _Incomplete
                need += int.from_bytes(data[pos + 1 : pos + 1 + w], "big")
                pos += 1 + w
            else:
                w = _MAP_WIDTH[tag]
                if pos + 1 + w > end:
                    raise _Incomplete
                need += int.from_bytes(data[pos + 1 : pos + 1 + w], "big") * 2
                pos += 1 + w
        if pos > end:
            raise _Incomplete
    return pos


def _read_uint(data, pos: int, end: int) -> tuple[int, int]:
    """Read one MessagePack integer holding a non-negative value.

    Returns (value, end offset). Raises _Incomplete / _Malformed.
    """
    if pos >= end:
        raise _Incomplete
    tag = data[pos]
    if tag <= 0x7F:
        return tag, pos + 1
    width = _UINT_WIDTH.get(tag)
    if width is not None:
        if pos + 1 + width > end:
            raise _Incomplete
        return int.from_bytes(data[pos + 1 : pos + 1 + width], "big"), pos + 1 + width
    width = _INT_WIDTH.get(tag)
    if width is not None:
        if pos + 1 + width > end:
            raise _Incomplete
        value = int.from_bytes(data[pos + 1 : pos + 1 + width], "big", signed=True)
        if value < 0:
            raise _Malformed(pos)
        return value, pos + 1 + width
    raise _Malformed(pos)


def scan_value(data: bytes | bytearray, pos: int = 0, end: int | None = None) -> int:
    """End offset of the MessagePack value starting at *pos* in *data*."""
    if end is None:
        end = len(data)
    try:
        return _scan(data, pos, end)
    except _Incomplete:
        raise TruncatedFrame(pos, "input ends inside a MessagePack value") from None
    except _Malformed as exc:
        raise MalformedValue(
            pos, f"invalid MessagePack byte 0x{data[exc.offset]:02X} at byte {exc.offset}"
        ) from None


def read_checksum(data: bytes | bytearray, pos: int = 0, end: int | None = None) -> tuple[int, int]:
    """Read one MessagePack-encoded checksum at *pos*, returning (value, end offset)."""
    if end is None:
        end = len(data)
    try:
        return _read_uint(data, pos, end)
    except _Incomplete:
        raise TruncatedFrame(pos, "input ends inside a frame checksum") from None
    except _Malformed:
        raise MalformedValue(
            pos, "frame checksum is not a MessagePack unsigned integer"
        ) from None


def _decode_payload(decode, payload: bytes, offset: int) -> Any:
    try:
        return decode(payload)
    except msgspec.ValidationError as exc:
        raise SchemaMismatch(offset, f"record does not match bound schema: {exc}") from exc
    except msgspec.DecodeError as exc:
        raise MalformedValue(offset, f"payload rejected by decoder: {exc}") from exc


def decode_binary(
    data: bytes | bytearray, schema: type | None = None, offset: int = 0
) -> tuple[Any, int]:
    """Decode one frame from *data* at *offset*.

    Returns (record, offset just past the frame). The CRC32 is recomputed
    over the exact payload bytes consumed and the record is returned only
    when it matches the stored checksum.
    """
    end = len(data)
    try:
        pend = _scan(data, offset, end)
    except _Incomplete:
        raise TruncatedFrame(offset, "input ends inside a frame payload") from None
    except _Malformed as exc:
        raise MalformedValue(
            offset,
            f"invalid MessagePack byte 0x{data[exc.offset]:02X} at byte {exc.offset}",
        ) from None
    try:
        stored, cend = _read_uint(data, pend, end)
    except _Incomplete:
        raise TruncatedFrame(offset, "input ends inside a frame checksum") from None
    except _Malformed:
        raise MalformedValue(
            offset, "frame checksum is not a MessagePack unsigned integer"
        ) from None
    payload = bytes(data[offset:pend])
    computed = zlib.crc32(payload)
    if computed != stored:
        raise ChecksumMismatch(offset, stored, computed)
    return _decode_payload(_decoder(schema).decode, payload, offset), cend


def iter_binary_frames(
    stream: BinaryIO,
    schema: type | None = None,
    *,
    buffer_size: int = DEFAULT_BUFFER_SIZE,
) -> Iterator[tuple[Any, int, int]]:
    """Yield (record, frame_start, frame_end) for consecutive frames in *stream*.

    Reads lazily through a bounded buffer. Returns normally when the stream
    ends exactly at a frame boundary; raises a DecodeError subclass for the
    first frame that fails, with the frame's start offset. Consecutive
    frames usually share a payload length, so the previous frame's length
    is tried first and confirmed by an exact-span decode plus checksum
    match; any disagreement falls back to an authoritative scan.
    """
    decode = _decoder(schema).decode
    buf = bytearray()
    base = 0  # absolute offset of buf[0]
    eof = False
    pos = 0  # absolute offset of the next frame
    guess = 0  # payload length of the previous frame

    def fill(target: int) -> bool:
        """Buffer through absolute offset target-1; False once EOF prevents it."""
        nonlocal eof
        while base + len(buf) < target:
            if eof:
                return False
            chunk = stream.read(buffer_size)
            if not chunk:
                eof = True
                return base + len(buf) >= target
            buf += chunk
        return True

    while True:
        if pos - base >= buffer_size * 2:
            del buf[: pos - base]
            base = pos
        if not fill(pos + 1):
            return  # stream ends exactly at a frame boundary

        record = _MISS
        pend = cend = 0
        if guess:
            pend = pos + guess
            fill(pend + 10)  # room for the largest checksum encoding
            if base + len(buf) > pend:
                try:
                    stored, cend_l = _read_uint(buf, pend - base, len(buf))
                except (_Incomplete, _Malformed):
                    pass
                else:
                    payload = bytes(buf[pos - base : pend - base])
                    if zlib.crc32(payload) == stored:
                        try:
                            candidate = decode(payload)
                        except msgspec.DecodeError:
                            pass
                        else:
                            record = candidate
                            cend = base + cend_l

        if record is _MISS:
            while True:
                try:
                    pend = base + _scan(buf, pos - base, len(buf))
                except _Incomplete:
                    if fill(base + len(buf) + 1):
                        continue
                    raise TruncatedFrame(pos, "input ends inside a frame payload") from None
                except _Malformed as exc:
                    raise MalformedValue(
                        pos,
                        f"invalid MessagePack byte 0x{buf[exc.offset]:02X}"
                        f" at byte {base + exc.offset}",
                    ) from None
                break
            while True:
                try:
                    stored, cend_l = _read_uint(buf, pend - base, len(buf))
                except _Incomplete:
                    if fill(base + len(buf) + 1):
                        continue
                    raise TruncatedFrame(pos, "input ends inside a frame checksum") from None
                except _Malformed:
                    raise MalformedValue(
                        pos, "frame checksum is not a MessagePack unsigned integer"
                    ) from None
                break
            cend = base + cend_l
            payload = bytes(buf[pos - base : pend - base])
            computed = zlib.crc32(payload)
            if computed != stored:
                raise ChecksumMismatch(pos, stored, computed)
            record = _decode_payload(decode, payload, pos)

        yield record, pos, cend
        guess = pend - pos
        pos = cend
