"""Command line entry point: inspect, verify, corrupt, sweep, and benchmark WAL files.

Exit codes: 0 on success, 1 when verify detects corruption (or on I/O
failure), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
import tempfile
from pathlib import Path

from . import bench as bench_mod
from . import faults
from .errors import UsageError
from .records import BenchRecord
from .recovery import TerminalKind, replay
from .wal import LogFormat

_FORMATS = {"text": LogFormat.TEXT, "bin": LogFormat.BINARY}
_KINDS = {kind.value: kind for kind in faults.TextCorruption}
_KINDS.update({kind.value: kind for kind in faults.BinaryCorruption})


def _schema_arg(parser):
    parser.add_argument(
        "--schema", choices=["bench", "raw"], default="bench",
        help="record schema: the built-in benchmark schema, or raw schema-less"
        " decoding (binary frames stay checksum-verified)",
    )


def _resolve_schema(name: str):
    return BenchRecord if name == "bench" else None


def _summary(record, limit=96) -> str:
    text = repr(record)
    return text if len(text) <= limit else text[: limit - 3] + "..."


def _terminal_line(terminal) -> str:
    n = terminal.records_recovered
    if terminal.kind is TerminalKind.CLEAN_END:
        return f"{n} records, clean end"
    if terminal.kind is TerminalKind.TRUNCATED:
        return f"{n} records, truncated at offset {terminal.offset}"
    return f"{n} records, corrupt at offset {terminal.offset}: {terminal.cause}"


def cmd_dump(args) -> int:
    cursor = replay(args.file, _FORMATS[args.format], _resolve_schema(args.schema))
    index = 0
    while True:
        offset = cursor.next_offset
        try:
            record = next(cursor)
        except StopIteration:
            break
        print(f"{index:>6} @{offset} {_summary(record)}")
        index += 1
    print(_terminal_line(cursor.terminal))
    return 0


def cmd_verify(args) -> int:
    cursor = replay(args.file, _FORMATS[args.format], _resolve_schema(args.schema))
    count = sum(1 for _ in cursor)
    terminal = cursor.terminal
    print(f"records recovered: {count}")
    if terminal.kind is TerminalKind.CLEAN_END:
        print("clean end")
        return 0
    if terminal.kind is TerminalKind.TRUNCATED:
        print(f"truncated tail at offset {terminal.offset}")
    else:
        print(
            f"corrupt at offset {terminal.offset}, detected at record {count}:"
            f" {terminal.cause}"
        )
    return 1


def cmd_corrupt(args) -> int:
    spec = faults.CorruptionSpec(
        format=_FORMATS[args.format],
        kind=_KINDS[args.kind],
        record_index=args.record,
        seed=args.seed,
    )
    target = faults.corrupt(args.in_file, spec, args.out_file)
    print(f"applied {args.kind} to record {args.record} of {args.in_file} -> {target}")
    return 0


def cmd_sweep(args) -> int:
    report = faults.flip_sweep(
        args.in_file, _resolve_schema(args.schema), max_bytes=args.max_bytes
    )
    with open(args.report, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["offset", "frame_index", "mutations", "detected", "failures"])
        for row in report.rows:
            writer.writerow(
                [row.offset, row.frame_index, row.mutations, row.detected, row.failures]
            )
    print(
        f"sweep: {report.total_mutations} mutations over {len(report.rows)} bytes,"
        f" {report.passed} passed, {report.failed} failed"
    )
    for failure in report.failures[:10]:
        print(f"  FAIL @{failure.offset} {failure.mutation}: {failure.reason}")
    print(f"report written to {args.report}")
    return 0


def cmd_bench(args) -> int:
    formats = (
        [LogFormat.TEXT, LogFormat.BINARY]
        if args.format == "both"
        else [_FORMATS[args.format]]
    )
    batch_sizes = [int(part) for part in args.batch.split(",")]
    shape = bench_mod.PayloadShape(
        comment_length=args.comment_len, objects_per_record=args.objects
    )

    def run(workdir) -> list:
        return bench_mod.run_benchmark(
            formats,
            batch_sizes,
            total_records=args.total,
            runs=args.runs,
            shape=shape,
            workdir=workdir,
            progress=print,
        )

    if args.dir is None:
        with tempfile.TemporaryDirectory(prefix="wal-bench-") as workdir:
            rows = run(workdir)
    else:
        Path(args.dir).mkdir(parents=True, exist_ok=True)
        rows = run(args.dir)
    bench_mod.emit_report(rows, args.out)
    print(f"\n{'format':<8} {'batch':>5} {'phase':>5} {'mean rec/s':>14} {'mean MB/s':>10}")
    for row in bench_mod.summarize(rows):
        print(
            f"{row.format:<8} {row.batch_size:>5} {row.phase:>5}"
            f" {row.rec_per_s:>14,.0f} {row.mb_per_s:>10.1f}"
        )
    print(f"report written to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wal",
        description="Inspect, verify, corrupt, sweep, and benchmark WAL files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dump", help="list records and the terminal status")
    p.add_argument("file")
    p.add_argument("--format", choices=sorted(_FORMATS), required=True)
    _schema_arg(p)
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("verify", help="exit 0 iff the file replays to a clean end")
    p.add_argument("file")
    p.add_argument("--format", choices=sorted(_FORMATS), required=True)
    _schema_arg(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("corrupt", help="apply one seeded corruption to a record")
    p.add_argument("--format", choices=sorted(_FORMATS), required=True)
    p.add_argument("--kind", choices=sorted(_KINDS), required=True)
    p.add_argument("--record", type=int, required=True, help="zero-based record index")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", dest="in_file", required=True)
    p.add_argument("--out", dest="out_file", default=None,
                   help="output path (default: mutate --in in place)")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("sweep", help="exhaustive single-byte flip sweep (binary)")
    p.add_argument("--in", dest="in_file", required=True)
    p.add_argument("--report", required=True, help="per-offset CSV output path")
    p.add_argument("--max-bytes", type=int, default=1 << 20)
    _schema_arg(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="write/read micro-benchmark")
    p.add_argument("--format", choices=["text", "bin", "both"], default="both")
    p.add_argument("--total", type=int, default=bench_mod.DEFAULT_TOTAL_RECORDS)
    p.add_argument("--batch", default="1,2,4", help="comma-separated batch sizes")
    p.add_argument("--runs", type=int, default=bench_mod.DEFAULT_RUNS)
    p.add_argument("--comment-len", type=int, default=16)
    p.add_argument("--objects", type=int, default=4)
    p.add_argument("--out", required=True, help="CSV report path")
    p.add_argument("--dir", default=None,
                   help="work directory for WAL files (default: a temp dir)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"wal: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"wal: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
