"""Parsing, validation, and month bucketing of normalized transaction records.

Two equivalent on-disk formats carry the same four fields per transaction:

* JSONL: one object per line, ``{"ts": int, "inputs": [str], "outputs": [str],
  "coinbase": bool}``, UTF-8, LF line endings.
* CSV: header ``ts,inputs,outputs,coinbase``; the address lists are
  ';'-joined inside a single cell; RFC-4180 quoting.

Both parsers are strict by default: a malformed line raises
:class:`~txgraph.errors.ParseError` carrying the line number.  With
``lenient=True`` bad lines are skipped and counted instead.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import InputError, ParseError, RecordError

# Reserved label for the synthetic coinbase source node.  Never a valid
# address: records containing it anywhere are rejected at validation.
SUPERNODE_TOKEN = "__COINBASE__"

CSV_HEADER = ["ts", "inputs", "outputs", "coinbase"]
LIST_SEP = ";"

_WHITESPACE = re.compile(r"\s")


def _check_address(addr: object) -> str:
    if not isinstance(addr, str) or not addr:
        raise RecordError(f"address must be a non-empty string, got {addr!r}")
    if _WHITESPACE.search(addr):
        raise RecordError(f"address contains whitespace: {addr!r}")
    if SUPERNODE_TOKEN in addr:
        raise RecordError(f"address contains the reserved token: {addr!r}")
    return addr


@dataclass(frozen=True)
class TxRecord:
    """One blockchain transaction in normalized form.

    ``inputs``/``outputs`` keep file order and may repeat addresses; the
    graph layer deduplicates.  A coinbase record has no inputs.
    """

    ts: int
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    coinbase: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if not isinstance(self.ts, int) or isinstance(self.ts, bool):
            raise RecordError(f"ts must be an integer, got {self.ts!r}")
        if not self.outputs:
            raise RecordError("outputs must be non-empty")
        if self.coinbase and self.inputs:
            raise RecordError("coinbase transaction must have no inputs")
        if not self.coinbase and not self.inputs:
            raise RecordError("non-coinbase transaction must have inputs")
        for addr in self.inputs:
            _check_address(addr)
        for addr in self.outputs:
            _check_address(addr)


@dataclass(frozen=True, order=True)
class YearMonth:
    """A UTC calendar month."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise InputError(f"month out of range: {self.month}")

    @classmethod
    def parse(cls, text: str) -> "YearMonth":
        try:
            y, m = text.split("-")
            return cls(int(y), int(m))
        except (ValueError, InputError) as exc:
            raise InputError(f"expected YYYY-MM, got {text!r}") from exc

    @classmethod
    def from_timestamp(cls, ts: int) -> "YearMonth":
        dt = datetime.fromtimestamp(ts, tz=timezone.utc)
        return cls(dt.year, dt.month)

    def add(self, months: int) -> "YearMonth":
        total = self.year * 12 + (self.month - 1) + months
        return YearMonth(total // 12, total % 12 + 1)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass
class DatasetManifest:
    """Provenance sidecar written next to a record file."""

    coin_name: str
    genesis_month: YearMonth | None
    record_count: int
    source: str  # "file" or "explorer"

    def to_json(self) -> str:
        return json.dumps(
            {
                "coin_name": self.coin_name,
                "genesis_month": str(self.genesis_month) if self.genesis_month else None,
                "record_count": self.record_count,
                "source": self.source,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        obj = json.loads(text)
        gm = obj.get("genesis_month")
        return cls(
            coin_name=obj["coin_name"],
            genesis_month=YearMonth.parse(gm) if gm else None,
            record_count=int(obj["record_count"]),
            source=obj["source"],
        )


def month_index(ts: int, genesis: YearMonth) -> int:
    """Zero-based calendar-month offset of ``ts`` from the genesis month.

    Raises :class:`InputError` for timestamps before the genesis month.
    """
    ym = YearMonth.from_timestamp(ts)
    idx = (ym.year - genesis.year) * 12 + (ym.month - genesis.month)
    if idx < 0:
        raise InputError(f"timestamp {ts} ({ym}) precedes genesis month {genesis}")
    return idx


def bucket_by_month(records: Iterable[TxRecord], genesis: YearMonth) -> dict[int, list[TxRecord]]:
    """Group records by month index.

    Every index from 0 through the last observed month is present, so gap
    months appear as empty lists and time series stay aligned.
    """
    buckets: dict[int, list[TxRecord]] = {}
    last = -1
    for rec in records:
        idx = month_index(rec.ts, genesis)
        buckets.setdefault(idx, []).append(rec)
        last = max(last, idx)
    return {i: buckets.get(i, []) for i in range(last + 1)}


def _text_stream(stream: IO) -> IO[str]:
    if isinstance(stream, (io.RawIOBase, io.BufferedIOBase)) or "b" in getattr(stream, "mode", ""):
        return io.TextIOWrapper(stream, encoding="utf-8", newline="")
    return stream


def _record_from_fields(ts, inputs, outputs, coinbase) -> TxRecord:
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise RecordError(f"ts must be an integer, got {ts!r}")
    if not isinstance(coinbase, bool):
        raise RecordError(f"coinbase must be a boolean, got {coinbase!r}")
    if not isinstance(inputs, (list, tuple)) or not isinstance(outputs, (list, tuple)):
        raise RecordError("inputs and outputs must be lists")
    return TxRecord(ts=ts, inputs=tuple(inputs), outputs=tuple(outputs), coinbase=coinbase)


def parse_jsonl(
    stream: IO, *, lenient: bool = False, skip_log: list | None = None
) -> Iterator[TxRecord]:
    """Yield records from a JSONL stream in file order.

    Strict mode raises :class:`ParseError` with the offending line number.
    In lenient mode bad lines are appended to ``skip_log`` (if given) as
    ``(line_no, reason)`` and skipped.
    """
    text = _text_stream(stream)
    for line_no, line in enumerate(text, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"malformed JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ParseError(line_no, "expected a JSON object")
            missing = [k for k in CSV_HEADER if k not in obj]
            if missing:
                raise ParseError(line_no, f"missing keys: {', '.join(missing)}")
            try:
                yield _record_from_fields(
                    obj["ts"], obj["inputs"], obj["outputs"], obj["coinbase"]
                )
            except RecordError as exc:
                raise ParseError(line_no, str(exc)) from exc
        except ParseError as exc:
            if not lenient:
                raise
            if skip_log is not None:
                skip_log.append((line_no, str(exc)))


def _split_list(cell: str) -> tuple[str, ...]:
    return tuple(cell.split(LIST_SEP)) if cell else ()


def parse_csv(
    stream: IO, *, lenient: bool = False, skip_log: list | None = None
) -> Iterator[TxRecord]:
    """Yield records from a CSV stream; semantics match :func:`parse_jsonl`."""
    text = _text_stream(stream)
    reader = csv.reader(text)
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ParseError(1, f"expected header {','.join(CSV_HEADER)}, got {header!r}")
    for row in reader:
        line_no = reader.line_num
        try:
            if len(row) != 4:
                raise ParseError(line_no, f"expected 4 fields, got {len(row)}")
            ts_text, inputs_text, outputs_text, coinbase_text = row
            try:
                ts = int(ts_text)
            except ValueError as exc:
                raise ParseError(line_no, f"bad ts: {ts_text!r}") from exc
            if coinbase_text not in ("true", "false"):
                raise ParseError(line_no, f"bad coinbase flag: {coinbase_text!r}")
            try:
                yield _record_from_fields(
                    ts, _split_list(inputs_text), _split_list(outputs_text),
                    coinbase_text == "true",
                )
            except RecordError as exc:
                raise ParseError(line_no, str(exc)) from exc
        except ParseError as exc:
            if not lenient:
                raise
            if skip_log is not None:
                skip_log.append((line_no, str(exc)))


def write_jsonl(records: Iterable[TxRecord], stream: IO) -> int:
    """Write records in canonical JSONL form; returns the record count."""
    text = _text_stream(stream)
    n = 0
    for rec in records:
        obj = {
            "ts": rec.ts,
            "inputs": list(rec.inputs),
            "outputs": list(rec.outputs),
            "coinbase": rec.coinbase,
        }
        text.write(json.dumps(obj, separators=(",", ":")) + "\n")
        n += 1
    text.flush()
    return n


def write_csv(records: Iterable[TxRecord], stream: IO) -> int:
    """Write records in canonical CSV form; returns the record count.

    Addresses containing the ';' list separator cannot be represented in
    this format and are rejected.
    """
    text = _text_stream(stream)
    writer = csv.writer(text, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    n = 0
    for rec in records:
        for addr in rec.inputs + rec.outputs:
            if LIST_SEP in addr:
                raise RecordError(f"address not representable in CSV: {addr!r}")
        writer.writerow(
            [
                str(rec.ts),
                LIST_SEP.join(rec.inputs),
                LIST_SEP.join(rec.outputs),
                "true" if rec.coinbase else "false",
            ]
        )
        n += 1
    text.flush()
    return n


def read_records(path: str | Path, *, lenient: bool = False, skip_log: list | None = None) -> list[TxRecord]:
    """Load a record file, choosing the parser from the file suffix."""
    path = Path(path)
    parser = parse_csv if path.suffix.lower() == ".csv" else parse_jsonl
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(parser(fh, lenient=lenient, skip_log=skip_log))


def write_records(records: Iterable[TxRecord], path: str | Path) -> int:
    """Write a record file, choosing the writer from the file suffix."""
    path = Path(path)
    writer = write_csv if path.suffix.lower() == ".csv" else write_jsonl
    with open(path, "w", encoding="utf-8", newline="") as fh:
        return writer(records, fh)
