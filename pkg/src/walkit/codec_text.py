"""JSON text record codec, one record per line.

The canonical writer emits ``<compact JSON object>\\n`` per record in field
declaration order. The decoder is deliberately liberal: it skips any amount
of whitespace (space, tab, CR, LF) between values, accepts object fields in
any order, and ignores unknown fields. It requires every schema field to be
present with a type-compatible value; numbers outside a field's declared
range count as type-incompatible. Duplicate keys within one object resolve
last-wins.

Known blind spot, inherent to the format: mutating a stored value to a
different value of the same JSON type decodes without error and yields the
mutated value. There is no checksum in this format.
"""

from __future__ import annotations

import codecs
import json
import re
from functools import lru_cache
from typing import Any, BinaryIO, Iterator

import msgspec

from .errors import MalformedValue, SchemaMismatch, TruncatedFrame, UsageError

DEFAULT_BUFFER_SIZE = 64 * 1024

_WS_CHARS = " \t\r\n"
_NON_WS = re.compile(r"[^ \t\r\n]")
_JSON_DECODER = json.JSONDecoder()


@lru_cache(maxsize=None)
def _typed_json(schema: type) -> msgspec.json.Decoder:
    return msgspec.json.Decoder(schema)


def encode_text(record: Any, schema: type | None = None) -> bytes:
    """Encode one record as a UTF-8 JSON line, terminator included.

    Output is deterministic for a given record: compact separators, fields
    in declaration order. With *schema* given the line is validated before
    it is returned.
    """
    try:
        line = msgspec.json.encode(record)
    except (msgspec.EncodeError, TypeError) as exc:
        raise UsageError(f"record is not encodable: {exc}") from exc
    if schema is not None:
        try:
            _typed_json(schema).decode(line)
        except (msgspec.ValidationError, msgspec.DecodeError) as exc:
            raise UsageError(f"record does not conform to schema: {exc}") from exc
    return line + b"\n"


# ---------------------------------------------------------------------------
# Truncation detection
# ---------------------------------------------------------------------------

class _NotPrefix(Exception):
    pass


_NUMBER_FULL = re.compile(r"-?(?:0|[1-9][0-9]*)(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?")
_NUMBER_PREFIX = re.compile(r"-?(?:0|[1-9][0-9]*)?(?:\.[0-9]*)?(?:[eE][+-]?[0-9]*)?")
_HEX_DIGITS = "0123456789abcdefABCDEF"


def _skip_string(text: str, i: int, n: int) -> int:
    i += 1
    while i < n:
        c = text[i]
        if c == '"':
            return i + 1
        if c == "\\":
            if i + 1 >= n:
                return -1
            e = text[i + 1]
            if e == "u":
                j = i + 2
                k = 0
                while k < 4 and j < n:
                    if text[j] not in _HEX_DIGITS:
                        raise _NotPrefix
                    j += 1
                    k += 1
                if k < 4:
                    return -1
                i = j
            elif e in '"\\/bfnrt':
                i += 2
            else:
                raise _NotPrefix
        elif c < " ":
            raise _NotPrefix
        else:
            i += 1
    return -1


def _skip_number(text: str, i: int, n: int) -> int:
    j = _NUMBER_PREFIX.match(text, i).end()
    if j >= n:
        return -1
    full = _NUMBER_FULL.match(text, i)
    if full is None or full.end() != j:
        raise _NotPrefix
    return j


def _skip_literal(text: str, i: int, n: int) -> int:
    j = i
    while j < n and text[j].isalpha():
        j += 1
    word = text[i:j]
    for lit in ("true", "false", "null"):
        if lit.startswith(word):
            if word == lit:
                return j
            if j >= n:
                return -1
    raise _NotPrefix


def _is_json_prefix(text: str, i: int = 0) -> bool:
    """True if text[i:] can be extended into one complete JSON value.

    Used to tell a torn tail (truncation) apart from mid-file damage once
    the input is exhausted. Only ever called after a parse failure, so a
    complete top-level value followed by junk reports False.
    """
    n = len(text)
    stack: list[str] = []
    state = "value"
    try:
        while True:
            while i < n and text[i] in _WS_CHARS:
                i += 1
            if i >= n:
                return True
            c = text[i]
            if state == "value" or state == "value_or_close":
                if state == "value_or_close" and c == "]":
                    stack.pop()
                    i += 1
                    state = "after"
                elif c == "{":
                    stack.append("{")
                    i += 1
                    state = "key_or_close"
                elif c == "[":
                    stack.append("[")
                    i += 1
                    state = "value_or_close"
                elif c == '"':
                    i = _skip_string(text, i, n)
                    if i < 0:
                        return True
                    state = "after"
                elif c in "-0123456789":
                    i = _skip_number(text, i, n)
                    if i < 0:
                        return True
                    state = "after"
                elif c in "tfn":
                    i = _skip_literal(text, i, n)
                    if i < 0:
                        return True
                    state = "after"
                else:
                    return False
            elif state == "key_or_close" or state == "key":
                if state == "key_or_close" and c == "}":
                    stack.pop()
                    i += 1
                    state = "after"
                elif c == '"':
                    i = _skip_string(text, i, n)
                    if i < 0:
                        return True
                    state = "colon"
                else:
                    return False
            elif state == "colon":
                if c != ":":
                    return False
                i += 1
                state = "value"
            else:  # after a completed value
                if not stack:
                    return False
                if stack[-1] == "{":
                    if c == ",":
                        i += 1
                        state = "key"
                    elif c == "}":
                        stack.pop()
                        i += 1
                    else:
                        return False
                else:
                    if c == ",":
                        i += 1
                        state = "value"
                    elif c == "]":
                        stack.pop()
                        i += 1
                    else:
                        return False
    except _NotPrefix:
        return False


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def _blen(text: str, a: int, b: int) -> int:
    """Byte length of text[a:b] when encoded as UTF-8."""
    seg = text[a:b]
    return len(seg) if seg.isascii() else len(seg.encode("utf-8"))


def _convert(obj: Any, schema: type, offset: int) -> Any:
    try:
        return msgspec.convert(obj, schema)
    except msgspec.ValidationError as exc:
        raise SchemaMismatch(offset, f"record does not match bound schema: {exc}") from exc


def decode_text(
    data: str | bytes | bytearray, schema: type | None = None, offset: int = 0
) -> tuple[Any, int]:
    """Decode one record from *data* starting at *offset*.

    Skips leading whitespace first. Accepts str (character offsets) or
    UTF-8 bytes (byte offsets); returns (record, offset past the value).
    """
    if isinstance(data, (bytes, bytearray)):
        raw = bytes(data)
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedValue(offset, f"invalid UTF-8: {exc}") from exc
        coff = offset if text.isascii() else len(raw[:offset].decode("utf-8"))
    else:
        text = data
        coff = offset

    m = _NON_WS.search(text, coff)
    if m is None:
        raise TruncatedFrame(offset, "no value found before end of input")
    start = m.start()
    start_off = offset + _blen(text, coff, start) if isinstance(data, (bytes, bytearray)) else start
    try:
        obj, end = _JSON_DECODER.raw_decode(text, start)
    except ValueError as exc:
        if _is_json_prefix(text, start):
            raise TruncatedFrame(start_off, f"input ends inside a record: {exc}") from None
        raise MalformedValue(start_off, str(exc)) from None
    record = obj if schema is None else _convert(obj, schema, start_off)
    if isinstance(data, (bytes, bytearray)):
        return record, start_off + _blen(text, start, end)
    return record, end


def iter_text_frames(
    stream: BinaryIO,
    schema: type | None = None,
    *,
    buffer_size: int = DEFAULT_BUFFER_SIZE,
) -> Iterator[tuple[Any, int, int]]:
    """Yield (record, frame_start, frame_end) for consecutive values in *stream*.

    Offsets are byte offsets; frame_start is the first non-whitespace byte
    of the value. Reads lazily through a bounded buffer, growing it only
    while a value straddles the buffered region. Returns normally at a
    clean end (trailing whitespace allowed); raises a DecodeError subclass
    for the first value that fails.
    """
    raw_decode = _JSON_DECODER.raw_decode
    udec = codecs.getincrementaldecoder("utf-8")()
    buf = ""
    cpos = 0  # char index of the consumption cursor within buf
    byte_pos = 0  # absolute byte offset of the cursor
    fed = 0  # absolute bytes consumed from the stream
    eof = False
    miss_chunks = 1

    def read_more(count: int) -> None:
        nonlocal buf, eof, fed
        for _ in range(count):
            if eof:
                return
            chunk = stream.read(buffer_size)
            try:
                if not chunk:
                    eof = True
                    buf += udec.decode(b"", final=True)
                    return
                text = udec.decode(chunk)
            except UnicodeDecodeError as exc:
                raise MalformedValue(fed, f"invalid UTF-8 in input: {exc}") from None
            fed += len(chunk)
            buf += text

    while True:
        m = _NON_WS.search(buf, cpos)
        if m is None:
            byte_pos += _blen(buf, cpos, len(buf))
            buf = ""
            cpos = 0
            if eof:
                return
            read_more(1)
            continue
        start = m.start()
        try:
            obj, end = raw_decode(buf, start)
        except ValueError as exc:
            if not eof:
                # the value may simply straddle the buffered region
                read_more(miss_chunks)
                miss_chunks = min(miss_chunks * 2, 256)
                continue
            byte_start = byte_pos + _blen(buf, cpos, start)
            if _is_json_prefix(buf, start):
                raise TruncatedFrame(byte_start, f"input ends inside a record: {exc}") from None
            raise MalformedValue(byte_start, str(exc)) from None
        miss_chunks = 1
        byte_start = byte_pos + _blen(buf, cpos, start)
        byte_end = byte_start + _blen(buf, start, end)
        record = obj if schema is None else _convert(obj, schema, byte_start)
        yield record, byte_start, byte_end
        cpos = end
        byte_pos = byte_end
        if cpos >= buffer_size:
            buf = buf[cpos:]
            cpos = 0
