"""Write/read micro-benchmark over both formats.

Writes a fixed record population in batches, then replays it, reporting
elapsed seconds, MB/s (MB = 10^6 bytes of file size), and records/s per
phase. Record generation happens outside the timed sections; reads go
through the page cache deliberately (no cache bypass), so the read phase
measures decode cost, not device throughput. Phases run single-threaded
and are timed with a monotonic clock around the whole phase.

Write throughput is bounded by the device's synchronous-write IOPS (every
batch ends in an fsync); the reported records/s makes that visible but no
assertion is tied to absolute device numbers.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import UsageError, WalError
from .records import BenchRecord, DataPoint
from .recovery import TerminalKind, replay
from .wal import LogFormat, open_log

DEFAULT_TOTAL_RECORDS = 100_000
DEFAULT_BATCH_SIZES = (1, 2, 4)
DEFAULT_RUNS = 3

_B_MIX = 0xA5A5A5A5
_COMMENT_SOURCE = "abcdefghijklmnopqrstuvwxyz0123456789"


@dataclass(frozen=True)
class PayloadShape:
    """Knobs that size one benchmark record."""

    comment_length: int = 16
    objects_per_record: int = 4


@dataclass(frozen=True)
class BenchConfig:
    """One benchmark configuration: format, batching, and scale."""

    format: LogFormat
    batch_size: int
    total_records: int = DEFAULT_TOTAL_RECORDS
    shape: PayloadShape = PayloadShape()

    def __post_init__(self):
        if self.batch_size < 1:
            raise UsageError("batch_size must be positive")
        if self.total_records % self.batch_size:
            raise UsageError(
                f"total_records ({self.total_records}) must be divisible by "
                f"batch_size ({self.batch_size})"
            )


@dataclass(frozen=True)
class BenchRow:
    """One CSV row: a single phase of a single run (or a per-config mean)."""

    format: str
    batch_size: int
    total_records: int
    phase: str
    run: str
    elapsed_s: float
    mb_per_s: float
    rec_per_s: float
    file_bytes: int


def generate_record(index: int, shape: PayloadShape = PayloadShape()) -> BenchRecord:
    """Deterministic benchmark record for *index*."""
    reps = shape.comment_length // len(_COMMENT_SOURCE) + 1
    comment = (_COMMENT_SOURCE * reps)[: shape.comment_length]
    return BenchRecord(
        id=index,
        comment=comment,
        objects=[
            DataPoint(a=index, b=index ^ _B_MIX)
            for _ in range(shape.objects_per_record)
        ],
    )


def _row(config: BenchConfig, phase: str, run: int, elapsed: float,
         file_bytes: int) -> BenchRow:
    return BenchRow(
        format=config.format.value,
        batch_size=config.batch_size,
        total_records=config.total_records,
        phase=phase,
        run=str(run),
        elapsed_s=elapsed,
        mb_per_s=file_bytes / 1e6 / elapsed,
        rec_per_s=config.total_records / elapsed,
        file_bytes=file_bytes,
    )


def run_write_phase(config: BenchConfig, path: str | Path, run: int = 0) -> BenchRow:
    """Write the whole population in batches, one durable flush per batch."""
    path = Path(path)
    path.unlink(missing_ok=True)
    batch_size = config.batch_size
    records = [generate_record(i, config.shape) for i in range(config.total_records)]
    batches = [
        records[i : i + batch_size]
        for i in range(0, config.total_records, batch_size)
    ]
    handle = open_log(path, config.format, BenchRecord)
    try:
        started = time.perf_counter()
        for batch in batches:
            handle.append_batch(batch)
        elapsed = time.perf_counter() - started
    finally:
        handle.close()
    return _row(config, "write", run, elapsed, path.stat().st_size)


def run_read_phase(config: BenchConfig, path: str | Path, run: int = 0) -> BenchRow:
    """Replay the whole file, folding over a field to consume each record."""
    path = Path(path)
    file_bytes = path.stat().st_size
    cursor = replay(path, config.format, BenchRecord)
    started = time.perf_counter()
    checksum = 0
    count = 0
    for record in cursor:
        checksum += record.id
        count += 1
    elapsed = time.perf_counter() - started
    status = cursor.terminal
    if status.kind is not TerminalKind.CLEAN_END:
        raise WalError(f"benchmark read phase did not end cleanly: {status}")
    if count != config.total_records:
        raise WalError(
            f"benchmark read phase replayed {count} records, "
            f"expected {config.total_records}"
        )
    return _row(config, "read", run, elapsed, file_bytes)


def run_benchmark(
    formats: Iterable[LogFormat],
    batch_sizes: Sequence[int] = DEFAULT_BATCH_SIZES,
    *,
    total_records: int = DEFAULT_TOTAL_RECORDS,
    runs: int = DEFAULT_RUNS,
    shape: PayloadShape = PayloadShape(),
    workdir: str | Path = ".",
    progress: Callable[[str], None] | None = None,
) -> list[BenchRow]:
    """Run every (format, batch size) configuration *runs* times.

    Returns one write row and one read row per run, in execution order.
    Work files land in *workdir* as ``bench-<format>-b<batch>.wal``.
    """
    workdir = Path(workdir)
    rows = []
    for format in formats:
        for batch_size in batch_sizes:
            config = BenchConfig(
                format=format,
                batch_size=batch_size,
                total_records=total_records,
                shape=shape,
            )
            path = workdir / f"bench-{format.value}-b{batch_size}.wal"
            for run in range(runs):
                wrow = run_write_phase(config, path, run)
                rows.append(wrow)
                rrow = run_read_phase(config, path, run)
                rows.append(rrow)
                if progress is not None:
                    progress(
                        f"{format.value} batch={batch_size} run={run}: "
                        f"write {wrow.rec_per_s:,.0f} rec/s, "
                        f"read {rrow.rec_per_s:,.0f} rec/s"
                    )
    return rows


def summarize(rows: Iterable[BenchRow]) -> list[BenchRow]:
    """Arithmetic-mean row per (format, batch_size, phase) group."""
    groups: dict[tuple, list[BenchRow]] = {}
    for row in rows:
        if row.run == "mean":
            continue
        groups.setdefault((row.format, row.batch_size, row.phase), []).append(row)
    means = []
    for (format, batch_size, phase), members in groups.items():
        n = len(members)
        means.append(
            BenchRow(
                format=format,
                batch_size=batch_size,
                total_records=members[0].total_records,
                phase=phase,
                run="mean",
                elapsed_s=sum(m.elapsed_s for m in members) / n,
                mb_per_s=sum(m.mb_per_s for m in members) / n,
                rec_per_s=sum(m.rec_per_s for m in members) / n,
                file_bytes=round(sum(m.file_bytes for m in members) / n),
            )
        )
    return means


_COLUMNS = [f.name for f in fields(BenchRow)]


def emit_report(rows: Sequence[BenchRow], output: str | Path) -> Path:
    """Write run rows plus per-configuration mean rows as CSV."""
    if not rows:
        raise UsageError("no benchmark rows to report")
    output = Path(output)
    with output.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_COLUMNS)
        for row in list(rows) + summarize(rows):
            writer.writerow(
                [
                    row.format, row.batch_size, row.total_records, row.phase,
                    row.run, repr(row.elapsed_s), repr(row.mb_per_s),
                    repr(row.rec_per_s), row.file_bytes,
                ]
            )
    return output


def load_report(path: str | Path) -> list[BenchRow]:
    """Parse a CSV report back into rows (means included)."""
    rows = []
    with Path(path).open(newline="") as handle:
        for entry in csv.DictReader(handle):
            rows.append(
                BenchRow(
                    format=entry["format"],
                    batch_size=int(entry["batch_size"]),
                    total_records=int(entry["total_records"]),
                    phase=entry["phase"],
                    run=entry["run"],
                    elapsed_s=float(entry["elapsed_s"]),
                    mb_per_s=float(entry["mb_per_s"]),
                    rec_per_s=float(entry["rec_per_s"]),
                    file_bytes=int(entry["file_bytes"]),
                )
            )
    return rows
