"""Reproducible corruption of WAL files.

Each corruption kind applies one seeded, byte-level mutation class to a
chosen record of a clean WAL file, so detection behavior can be verified
mechanically instead of by hand. ``expected_outcome`` ships the fixed
matrix of what replay must do for every (format, kind) pair, and
``flip_sweep`` generalizes the binary taxonomy into an exhaustive
single-byte mutation oracle.

Record indices are zero-based throughout.
"""

from __future__ import annotations

import enum
import io
import json
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .codec_binary import read_checksum, scan_value
from .errors import DecodeError, UsageError
from .recovery import ReplayCursor, TerminalKind
from .wal import LogFormat

_NON_WS = re.compile(r"[^ \t\r\n]")
_JSON_DECODER = json.JSONDecoder()
_NUMBER_TOKEN = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")


class TextCorruption(enum.Enum):
    """Mutation kinds that apply to the text format."""

    WHITESPACE_NOISE = "whitespace-noise"
    STRAY_SYMBOL = "stray-symbol"
    ADD_UNKNOWN_FIELD = "add-unknown-field"
    REMOVE_FIELD = "remove-field"
    RENAME_FIELD = "rename-field"
    REORDER_FIELDS = "reorder-fields"
    EMPTY_OBJECT = "empty-object"
    MUTATE_VALUE_SAME_TYPE = "mutate-value-same-type"
    MUTATE_VALUE_WRONG_TYPE = "mutate-value-wrong-type"


class BinaryCorruption(enum.Enum):
    """Mutation kinds that apply to the binary format."""

    MUTATE_OBJECT_HEADER = "mutate-object-header"
    MUTATE_FIELD_IDENTIFIER = "mutate-field-identifier"
    MUTATE_FIELD_VALUE = "mutate-field-value"
    MUTATE_CHECKSUM_HEADER = "mutate-checksum-header"
    MUTATE_CHECKSUM_VALUE = "mutate-checksum-value"


@dataclass(frozen=True)
class CorruptionSpec:
    """One corruption to apply: what kind, where, and with which seed.

    ``symbol`` only applies to STRAY_SYMBOL; None picks one of ``{}[]``
    from the seed.
    """

    format: LogFormat
    kind: TextCorruption | BinaryCorruption
    record_index: int
    seed: int = 0
    symbol: str | None = None


class Detection(enum.Enum):
    """How replay reacts to a corruption kind."""

    RECOVERED = "recovered"
    DETECTED_AT_TARGET = "detected-at-target"
    SILENTLY_ALTERED = "silently-altered"


@dataclass(frozen=True)
class ExpectedOutcome:
    detection: Detection


_TEXT_OUTCOMES = {
    TextCorruption.WHITESPACE_NOISE: Detection.RECOVERED,
    TextCorruption.STRAY_SYMBOL: Detection.DETECTED_AT_TARGET,
    TextCorruption.ADD_UNKNOWN_FIELD: Detection.RECOVERED,
    TextCorruption.REMOVE_FIELD: Detection.DETECTED_AT_TARGET,
    TextCorruption.RENAME_FIELD: Detection.DETECTED_AT_TARGET,
    TextCorruption.REORDER_FIELDS: Detection.RECOVERED,
    TextCorruption.EMPTY_OBJECT: Detection.DETECTED_AT_TARGET,
    TextCorruption.MUTATE_VALUE_SAME_TYPE: Detection.SILENTLY_ALTERED,
    TextCorruption.MUTATE_VALUE_WRONG_TYPE: Detection.DETECTED_AT_TARGET,
}
_BINARY_OUTCOMES = {kind: Detection.DETECTED_AT_TARGET for kind in BinaryCorruption}


def expected_outcome(
    format: LogFormat, kind: TextCorruption | BinaryCorruption
) -> ExpectedOutcome:
    """The fixed replay outcome for one (format, kind) pair."""
    table = _TEXT_OUTCOMES if format is LogFormat.TEXT else _BINARY_OUTCOMES
    try:
        return ExpectedOutcome(detection=table[kind])
    except KeyError:
        raise UsageError(
            f"corruption kind {kind!r} does not apply to format {format.value}"
        ) from None


# ---------------------------------------------------------------------------
# Span indexing
# ---------------------------------------------------------------------------

def text_value_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of each top-level JSON value in *text*."""
    spans = []
    pos = 0
    while True:
        m = _NON_WS.search(text, pos)
        if m is None:
            return spans
        try:
            _, end = _JSON_DECODER.raw_decode(text, m.start())
        except ValueError as exc:
            raise UsageError(f"input does not parse as a text WAL: {exc}") from exc
        spans.append((m.start(), end))
        pos = end


def binary_frame_spans(data: bytes) -> list[tuple[int, int, int]]:
    """(payload_start, payload_end, frame_end) for each frame in *data*."""
    spans = []
    pos = 0
    n = len(data)
    try:
        while pos < n:
            pend = scan_value(data, pos, n)
            _, cend = read_checksum(data, pend, n)
            spans.append((pos, pend, cend))
            pos = cend
    except DecodeError as exc:
        raise UsageError(f"input does not parse as a binary WAL: {exc}") from exc
    return spans


@dataclass(frozen=True)
class _Token:
    role: str  # "key" or "value"
    kind: str
    start: int
    end: int


def _walk_tokens(data: bytes, pos: int, role: str, out: list[_Token]) -> int:
    """Record role-tagged token spans of one canonical MessagePack value."""
    tag = data[pos]
    if tag <= 0x7F or tag >= 0xE0:
        end, kind = pos + 1, "int"
    elif 0xCC <= tag <= 0xCF:
        end, kind = pos + 1 + (1 << (tag - 0xCC)), "int"
    elif 0xD0 <= tag <= 0xD3:
        end, kind = pos + 1 + (1 << (tag - 0xD0)), "int"
    elif tag in (0xC0, 0xC2, 0xC3):
        end, kind = pos + 1, "scalar"
    elif tag == 0xCA:
        end, kind = pos + 5, "float"
    elif tag == 0xCB:
        end, kind = pos + 9, "float"
    elif 0xA0 <= tag <= 0xBF:
        end, kind = pos + 1 + (tag & 0x1F), "str"
    elif tag == 0xD9:
        end, kind = pos + 2 + data[pos + 1], "str"
    elif tag == 0xDA:
        end, kind = pos + 3 + int.from_bytes(data[pos + 1 : pos + 3], "big"), "str"
    elif tag == 0xDB:
        end, kind = pos + 5 + int.from_bytes(data[pos + 1 : pos + 5], "big"), "str"
    elif 0x90 <= tag <= 0x9F or tag in (0xDC, 0xDD):
        if tag <= 0x9F:
            count, end = tag & 0x0F, pos + 1
        elif tag == 0xDC:
            count, end = int.from_bytes(data[pos + 1 : pos + 3], "big"), pos + 3
        else:
            count, end = int.from_bytes(data[pos + 1 : pos + 5], "big"), pos + 5
        out.append(_Token(role, "array_header", pos, end))
        for _ in range(count):
            end = _walk_tokens(data, end, "value", out)
        return end
    elif 0x80 <= tag <= 0x8F or tag in (0xDE, 0xDF):
        if tag <= 0x8F:
            count, end = tag & 0x0F, pos + 1
        elif tag == 0xDE:
            count, end = int.from_bytes(data[pos + 1 : pos + 3], "big"), pos + 3
        else:
            count, end = int.from_bytes(data[pos + 1 : pos + 5], "big"), pos + 5
        out.append(_Token(role, "map_header", pos, end))
        for _ in range(count):
            end = _walk_tokens(data, end, "key", out)
            end = _walk_tokens(data, end, "value", out)
        return end
    else:
        raise UsageError(f"unsupported MessagePack tag 0x{tag:02X} in payload")
    out.append(_Token(role, kind, pos, end))
    return end


# ---------------------------------------------------------------------------
# Text mutations
# ---------------------------------------------------------------------------

def _ws_insert_points(text: str, start: int, end: int) -> list[int]:
    """Positions inside [start, end) where whitespace stays insignificant."""
    points = []
    in_str = False
    esc = False
    for i in range(start, end):
        c = text[i]
        if in_str:
            if esc:
                esc = False
            elif c == "\\":
                esc = True
            elif c == '"':
                in_str = False
            continue
        if c == '"':
            in_str = True
        elif c in "{}[]:,":
            points.append(i)
            points.append(i + 1)
    return sorted(set(points))


def _number_spans(text: str, start: int, end: int) -> list[tuple[int, int]]:
    """Spans of numeric literals (outside strings) inside [start, end)."""
    spans = []
    in_str = False
    esc = False
    i = start
    while i < end:
        c = text[i]
        if in_str:
            if esc:
                esc = False
            elif c == "\\":
                esc = True
            elif c == '"':
                in_str = False
            i += 1
        elif c == '"':
            in_str = True
            i += 1
        elif c in "-0123456789":
            m = _NUMBER_TOKEN.match(text, i)
            spans.append((m.start(), m.end()))
            i = m.end()
        else:
            i += 1
    return spans


def _mutate_digit(token: str, rng: random.Random) -> str:
    """New token of equal length, different value, valid JSON, never larger
    than the original unless the original is a single digit or short."""
    int_start = 1 if token[0] == "-" else 0
    int_len = 0
    for ch in token[int_start:]:
        if not ch.isdigit():
            break
        int_len += 1
    positions = [i for i, ch in enumerate(token) if ch.isdigit()]
    rng.shuffle(positions)
    for pos in positions:
        orig = int(token[pos])
        lo = 1 if (pos == int_start and int_len > 1) else 0
        down = [d for d in range(lo, orig)]
        if down:
            return token[:pos] + str(rng.choice(down)) + token[pos + 1 :]
        if int_len < 10:  # increasing a digit cannot overflow 32 bits here
            up = [d for d in range(orig + 1, 10)]
            if up:
                return token[:pos] + str(rng.choice(up)) + token[pos + 1 :]
    raise UsageError(f"cannot safely mutate numeric literal {token!r}")


def _corrupt_text(data: bytes, spec: CorruptionSpec, rng: random.Random) -> bytes:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise UsageError(f"input does not parse as a text WAL: {exc}") from exc
    spans = text_value_spans(text)
    if not 0 <= spec.record_index < len(spans):
        raise UsageError(
            f"record index {spec.record_index} out of range for {len(spans)} records"
        )
    start, end = spans[spec.record_index]
    gap_lo = spans[spec.record_index - 1][1] if spec.record_index else 0
    kind = spec.kind

    if kind is TextCorruption.WHITESPACE_NOISE:
        points = set(_ws_insert_points(text, start, end))
        points.update(range(gap_lo, start + 1))
        inserts = []
        for _ in range(rng.randint(1, 4)):
            pos = rng.choice(sorted(points))
            run = "".join(rng.choice(" \t\n") for _ in range(rng.randint(1, 3)))
            inserts.append((pos, run))
        out = text
        for pos, run in sorted(inserts, reverse=True):
            out = out[:pos] + run + out[pos:]
        return out.encode("utf-8")

    if kind is TextCorruption.STRAY_SYMBOL:
        symbol = spec.symbol if spec.symbol is not None else rng.choice("{}[]")
        if symbol not in "{}[]":
            raise UsageError(f"stray symbol must be one of {{}}[], got {symbol!r}")
        pos = rng.randint(gap_lo, start)
        return (text[:pos] + symbol + text[pos:]).encode("utf-8")

    if kind is TextCorruption.EMPTY_OBJECT:
        return (text[:start] + "{}\n" + text[start:]).encode("utf-8")

    if kind is TextCorruption.ADD_UNKNOWN_FIELD:
        body = text[start:end]
        if not body.startswith("{"):
            raise UsageError("targeted record is not a JSON object")
        empty = body[1:-1].strip(" \t\r\n") == ""
        field = f'"x_{rng.randrange(10**6)}":{rng.randrange(10**6)}'
        if not empty:
            field += ","
        return (text[: start + 1] + field + text[start + 1 :]).encode("utf-8")

    if kind in (
        TextCorruption.REMOVE_FIELD,
        TextCorruption.RENAME_FIELD,
        TextCorruption.REORDER_FIELDS,
    ):
        obj = json.loads(text[start:end])
        if not isinstance(obj, dict) or not obj:
            raise UsageError("targeted record is not a JSON object with fields")
        keys = list(obj)
        if kind is TextCorruption.REMOVE_FIELD:
            del obj[rng.choice(keys)]
        elif kind is TextCorruption.RENAME_FIELD:
            victim = rng.choice(keys)
            renamed = victim + "_" + rng.choice("qrstuvwz")
            obj = {renamed if k == victim else k: v for k, v in obj.items()}
        else:
            if len(keys) < 2:
                raise UsageError("record needs at least two fields to reorder")
            order = keys[:]
            while order == keys:
                rng.shuffle(order)
            obj = {k: obj[k] for k in order}
        replacement = json.dumps(obj, separators=(",", ":"), ensure_ascii=False)
        return (text[:start] + replacement + text[end:]).encode("utf-8")

    # value mutations
    spans_in_record = _number_spans(text, start, end)
    if not spans_in_record:
        raise UsageError("targeted record contains no numeric literal")
    a, b = spans_in_record[rng.randrange(len(spans_in_record))]
    if kind is TextCorruption.MUTATE_VALUE_SAME_TYPE:
        replacement = _mutate_digit(text[a:b], rng)
    else:
        replacement = rng.choice(['"x"', "true", "null", "-1"])
    return (text[:a] + replacement + text[b:]).encode("utf-8")


# ---------------------------------------------------------------------------
# Binary mutations
# ---------------------------------------------------------------------------

def _corrupt_binary(data: bytes, spec: CorruptionSpec, rng: random.Random) -> bytes:
    spans = binary_frame_spans(data)
    if not 0 <= spec.record_index < len(spans):
        raise UsageError(
            f"record index {spec.record_index} out of range for {len(spans)} records"
        )
    pstart, pend, cend = spans[spec.record_index]
    out = bytearray(data)
    kind = spec.kind

    if kind is BinaryCorruption.MUTATE_OBJECT_HEADER:
        offset = pstart
    elif kind in (BinaryCorruption.MUTATE_FIELD_IDENTIFIER, BinaryCorruption.MUTATE_FIELD_VALUE):
        tokens: list[_Token] = []
        _walk_tokens(data, pstart, "value", tokens)
        if kind is BinaryCorruption.MUTATE_FIELD_IDENTIFIER:
            pool = [t for t in tokens if t.role == "key"]
        else:
            pool = [t for t in tokens if t.role == "value" and not t.kind.endswith("_header")]
        if not pool:
            raise UsageError("record has no byte region of the requested kind")
        token = pool[rng.randrange(len(pool))]
        offset = rng.randrange(token.start, token.end)
    elif kind is BinaryCorruption.MUTATE_CHECKSUM_HEADER:
        offset = pend
        if cend - pend == 1:
            # fixint checksum: tag and value share one byte; force a type change
            out[offset] = rng.randrange(0x80, 0x100)
            return bytes(out)
    elif kind is BinaryCorruption.MUTATE_CHECKSUM_VALUE:
        if cend - pend == 1:
            # fixint checksum: change it to a different fixint, same type
            offset = pend
            out[offset] = rng.choice([b for b in range(0x80) if b != data[offset]])
            return bytes(out)
        offset = rng.randrange(pend + 1, cend)
    else:
        raise UsageError(f"corruption kind {kind!r} does not apply to the binary format")

    out[offset] = (out[offset] + rng.randrange(1, 256)) & 0xFF
    return bytes(out)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def corrupt_bytes(data: bytes, spec: CorruptionSpec) -> bytes:
    """Apply *spec* to in-memory WAL bytes, returning the mutated copy.

    Deterministic for a given spec (including its seed). The mutation is
    confined to the targeted record's byte span, except that whitespace
    noise and stray symbols may land in the gap before it.
    """
    rng = random.Random(spec.seed)
    if spec.format is LogFormat.TEXT:
        if not isinstance(spec.kind, TextCorruption):
            raise UsageError(
                f"corruption kind {spec.kind!r} does not apply to the text format"
            )
        return _corrupt_text(data, spec, rng)
    if not isinstance(spec.kind, BinaryCorruption):
        raise UsageError(
            f"corruption kind {spec.kind!r} does not apply to the binary format"
        )
    return _corrupt_binary(data, spec, rng)


def corrupt(
    input_path: str | Path, spec: CorruptionSpec, output_path: str | Path | None = None
) -> Path:
    """Apply *spec* to a WAL file.

    Writes the mutated bytes to *output_path*; with None the file is
    mutated in place. Returns the path written.
    """
    data = Path(input_path).read_bytes()
    mutated = corrupt_bytes(data, spec)
    target = Path(output_path) if output_path is not None else Path(input_path)
    target.write_bytes(mutated)
    return target


# ---------------------------------------------------------------------------
# Exhaustive flip sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepFailure:
    offset: int
    mutation: str
    reason: str


@dataclass(frozen=True)
class SweepRow:
    offset: int
    frame_index: int
    mutations: int
    detected: int
    failures: int


@dataclass(frozen=True)
class SweepReport:
    """Outcome of a flip sweep: per-offset rows plus aggregate counts."""

    total_mutations: int
    passed: int
    failures: list[SweepFailure]
    rows: list[SweepRow]

    @property
    def failed(self) -> int:
        return len(self.failures)


def flip_sweep(
    source: bytes | str | Path,
    schema: type | None = None,
    *,
    max_bytes: int = 1 << 20,
) -> SweepReport:
    """Mutate every byte of a binary WAL every way a single byte can flip.

    For each offset, applies the 8 single-bit flips plus the all-bits
    flip, replays the mutated image, and checks prefix safety: the yielded
    records must be a prefix of the clean replay, the terminal must not be
    a clean end, and detection must come at or before the containing
    frame. Failures are collected, never raised.
    """
    data = source if isinstance(source, (bytes, bytearray)) else Path(source).read_bytes()
    data = bytes(data)
    if len(data) > max_bytes:
        raise UsageError(f"input is {len(data)} bytes; sweep is bounded to {max_bytes}")
    spans = binary_frame_spans(data)
    frame_of = [0] * len(data)
    for index, (pstart, _, cend) in enumerate(spans):
        for off in range(pstart, cend):
            frame_of[off] = index

    baseline_cursor = ReplayCursor(io.BytesIO(data), LogFormat.BINARY, schema)
    baseline: list[Any] = list(baseline_cursor)
    terminal = baseline_cursor.terminal
    if terminal.kind is not TerminalKind.CLEAN_END:
        raise UsageError(f"input does not replay cleanly: {terminal.cause}")

    rows = []
    failures: list[SweepFailure] = []
    total = 0
    for off in range(len(data)):
        original = data[off]
        variants = [original ^ (1 << bit) for bit in range(8)]
        variants.append(original ^ 0xFF)
        detected = 0
        failed_here = 0
        for variant in variants:
            mutated = bytearray(data)
            mutated[off] = variant
            cursor = ReplayCursor(io.BytesIO(bytes(mutated)), LogFormat.BINARY, schema)
            records = list(cursor)
            status = cursor.terminal
            reason = None
            if records != baseline[: len(records)]:
                reason = "yielded records are not a prefix of the clean replay"
            elif status.kind is TerminalKind.CLEAN_END:
                reason = "mutation was not detected (clean end)"
            elif len(records) > frame_of[off]:
                reason = (
                    f"detected late: {len(records)} records recovered after"
                    f" mutating frame {frame_of[off]}"
                )
            if reason is None:
                detected += 1
            else:
                failed_here += 1
                failures.append(
                    SweepFailure(off, f"0x{original:02X}->0x{variant:02X}", reason)
                )
        total += len(variants)
        rows.append(SweepRow(off, frame_of[off], len(variants), detected, failed_here))
    return SweepReport(
        total_mutations=total,
        passed=total - len(failures),
        failures=failures,
        rows=rows,
    )
