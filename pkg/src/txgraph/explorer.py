"""Block-explorer HTTP client: fetch blocks as JSON, normalize them into
transaction records, with rate limiting, retry, and checkpointed ranges.

The wire contract is SoChain-style:

    GET {base_url}/block/{coin_code}/{height}

returning either ``{"status": "success", "data": {...}}`` or the block
object directly, with keys ``block_no``/``height``, ``time``/``timestamp``
and ``txs``/``transactions``.  Each transaction carries ``inputs`` and
``outputs`` lists whose items hold an ``address`` (possibly null for
shielded endpoints) and, for inputs, an optional ``from_output`` reference.

Transport is a callable ``(method, url) -> (status, body bytes)`` so tests
inject canned responses; the default uses urllib.
"""

from __future__ import annotations

import json
import random
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from .errors import (
    ExplorerError,
    InputError,
    NotFoundError,
    PermanentHTTPError,
    RetriesExhaustedError,
    SchemaError,
)
from .ingest import DatasetManifest, TxRecord, YearMonth

Transport = Callable[[str, str], tuple[int, bytes]]

# Stand-in address for shielded or unparseable endpoints, so graph
# construction stays total; occurrences are tallied in diagnostics.
OPAQUE_TOKEN = "__OPAQUE__"


@dataclass(frozen=True)
class ExplorerConfig:
    base_url: str
    coin_code: str
    requests_per_second: float = 2.0
    max_retries: int = 3
    timeout: float = 30.0

    def __post_init__(self):
        if self.requests_per_second <= 0:
            raise InputError("requests_per_second must be positive")
        if self.max_retries < 0:
            raise InputError("max_retries must be >= 0")


@dataclass
class RawBlock:
    height: int
    timestamp: int
    transactions: list[Any]


@dataclass
class NormalizeDiagnostics:
    opaque_inputs: int = 0
    opaque_outputs: int = 0


def urllib_transport(timeout: float = 30.0) -> Transport:
    def transport(method: str, url: str) -> tuple[int, bytes]:
        req = urllib.request.Request(url, method=method)
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                return resp.status, resp.read()
        except urllib.error.HTTPError as exc:
            return exc.code, exc.read()

    return transport


class RateLimiter:
    """Spaces request starts at least 1/rps apart.

    Clock and sleep are injectable so tests can drive a mock timeline.
    """

    def __init__(self, requests_per_second: float, *, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / requests_per_second
        self._clock = clock
        self._sleep = sleep
        self._last: float | None = None

    def wait(self) -> float:
        """Block until a request may start; returns its start timestamp."""
        now = self._clock()
        if self._last is not None:
            ready = self._last + self.interval
            if now < ready:
                self._sleep(ready - now)
                now = self._clock()
        self._last = now
        return now


def backoff_delay(attempt: int, rng: random.Random, *, base: float = 1.0, cap: float = 60.0) -> float:
    """Exponential backoff with jitter: uniform in [0.5, 1.0) x min(cap, base*2^attempt)."""
    return min(cap, base * (2.0**attempt)) * (0.5 + 0.5 * rng.random())


def _block_payload(body: bytes, url: str) -> dict:
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"unparseable block body from {url}: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"expected a JSON object from {url}")
    if "data" in obj and isinstance(obj["data"], dict):
        return obj["data"]
    return obj


def _require(payload: dict, names: tuple[str, ...], url: str):
    for name in names:
        if name in payload:
            return payload[name]
    raise SchemaError(f"block payload from {url} missing any of {names}")


class ExplorerClient:
    """One serialized request pipeline with its own rate limiter.

    Callers wanting parallel fetches shard height ranges across instances.
    """

    def __init__(
        self,
        config: ExplorerConfig,
        transport: Transport | None = None,
        *,
        clock=time.monotonic,
        sleep=time.sleep,
        seed: int | None = None,
    ):
        self.config = config
        self.transport = transport or urllib_transport(config.timeout)
        self._sleep = sleep
        self._limiter = RateLimiter(config.requests_per_second, clock=clock, sleep=sleep)
        self._rng = random.Random(seed)
        self.retries = 0  # transient-failure retries performed, cumulative

    def block_url(self, height: int) -> str:
        return f"{self.config.base_url.rstrip('/')}/block/{self.config.coin_code}/{height}"

    def fetch_block(self, height: int) -> RawBlock:
        url = self.block_url(height)
        attempt = 0
        while True:
            self._limiter.wait()
            try:
                status, body = self.transport("GET", url)
            except (TimeoutError, ConnectionError, OSError) as exc:
                status, body = None, b""
                failure = f"transport error: {exc}"
            else:
                failure = f"HTTP {status}"
            if status == 200:
                payload = _block_payload(body, url)
                txs = _require(payload, ("txs", "transactions"), url)
                if not isinstance(txs, list):
                    raise SchemaError(f"transactions must be a list in {url}")
                return RawBlock(
                    height=int(_require(payload, ("block_no", "height"), url)),
                    timestamp=int(_require(payload, ("time", "timestamp"), url)),
                    transactions=txs,
                )
            if status == 404:
                raise NotFoundError(f"no block at height {height} ({url})")
            if status is not None and 400 <= status < 500 and status != 429:
                raise PermanentHTTPError(status, url)
            # transient: 5xx, 429, or transport-level failure
            if attempt >= self.config.max_retries:
                raise RetriesExhaustedError(
                    f"giving up on {url} after {attempt} retries ({failure})"
                )
            self._sleep(backoff_delay(attempt, self._rng))
            attempt += 1
            self.retries += 1

    def fetch_range(
        self,
        from_height: int,
        to_height: int,
        sink: Callable[[TxRecord], None],
        *,
        checkpoint_path: str | Path | None = None,
        diagnostics: NormalizeDiagnostics | None = None,
    ) -> DatasetManifest:
        """Stream normalized records for all heights in order into ``sink``.

        With a checkpoint path the range is resumable: heights at or below
        the recorded ``last_height`` are skipped, and the checkpoint is
        rewritten after each completed height.
        """
        if from_height > to_height:
            raise InputError(f"bad range: {from_height} > {to_height}")
        start = from_height
        if checkpoint_path is not None:
            done = load_checkpoint(checkpoint_path)
            if done is not None:
                start = max(start, done + 1)
        count = 0
        min_ts: int | None = None
        for height in range(start, to_height + 1):
            block = self.fetch_block(height)
            for record in normalize_block(block, diagnostics=diagnostics):
                sink(record)
                count += 1
                if min_ts is None or record.ts < min_ts:
                    min_ts = record.ts
            if checkpoint_path is not None:
                store_checkpoint(checkpoint_path, height)
        return DatasetManifest(
            coin_name=self.config.coin_code,
            genesis_month=YearMonth.from_timestamp(min_ts) if min_ts is not None else None,
            record_count=count,
            source="explorer",
        )


def _is_previous_output_ref(item: dict) -> bool:
    if "from_output" in item:
        return item["from_output"] is not None
    addr = item.get("address")
    return addr is not None and addr != "coinbase"


def _endpoint_address(item: Any, side: str, tx_index: int, diagnostics: NormalizeDiagnostics) -> str:
    if not isinstance(item, dict):
        raise SchemaError(f"{side} entry of transaction {tx_index} is not an object")
    if "address" not in item:
        raise SchemaError(f"{side} of transaction {tx_index} has no address field")
    addr = item["address"]
    if addr is None:
        if side == "input":
            diagnostics.opaque_inputs += 1
        else:
            diagnostics.opaque_outputs += 1
        return OPAQUE_TOKEN
    if not isinstance(addr, str):
        raise SchemaError(f"{side} address of transaction {tx_index} is not a string")
    return addr


def normalize_block(
    block: RawBlock, *, diagnostics: NormalizeDiagnostics | None = None
) -> list[TxRecord]:
    """One TxRecord per transaction, all carrying the block timestamp.

    The block's first transaction with no previous-output references is the
    coinbase and gets an empty input list; shielded (null-address)
    endpoints map to the opaque token and are tallied.
    """
    diag = diagnostics if diagnostics is not None else NormalizeDiagnostics()
    records = []
    for idx, tx in enumerate(block.transactions):
        if not isinstance(tx, dict):
            raise SchemaError(f"transaction {idx} is not an object")
        raw_inputs = tx.get("inputs", [])
        raw_outputs = tx.get("outputs", [])
        if not isinstance(raw_inputs, list) or not isinstance(raw_outputs, list):
            raise SchemaError(f"transaction {idx} inputs/outputs must be lists")
        is_coinbase = idx == 0 and (
            not raw_inputs
            or all(
                isinstance(item, dict) and not _is_previous_output_ref(item)
                for item in raw_inputs
            )
        )
        if is_coinbase:
            inputs: tuple[str, ...] = ()
        else:
            if not raw_inputs:
                raise SchemaError(
                    f"transaction {idx} has neither inputs nor coinbase markers"
                )
            inputs = tuple(
                _endpoint_address(item, "input", idx, diag) for item in raw_inputs
            )
        outputs = tuple(
            _endpoint_address(item, "output", idx, diag) for item in raw_outputs
        )
        if not outputs:
            raise SchemaError(f"transaction {idx} has no outputs")
        records.append(
            TxRecord(ts=block.timestamp, inputs=inputs, outputs=outputs, coinbase=is_coinbase)
        )
    return records


def load_checkpoint(path: str | Path) -> int | None:
    path = Path(path)
    if not path.exists():
        return None
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        return int(obj["last_height"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"corrupt checkpoint file {path}: {exc}") from exc


def store_checkpoint(path: str | Path, height: int) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps({"last_height": height}), encoding="utf-8")
    tmp.replace(path)


def fetch_block(config: ExplorerConfig, height: int, transport: Transport) -> RawBlock:
    """Convenience wrapper constructing a throwaway client."""
    return ExplorerClient(config, transport).fetch_block(height)


def fetch_range(
    config: ExplorerConfig,
    from_height: int,
    to_height: int,
    sink: Callable[[TxRecord], None],
    transport: Transport,
    *,
    checkpoint_path: str | Path | None = None,
    diagnostics: NormalizeDiagnostics | None = None,
) -> DatasetManifest:
    """Convenience wrapper constructing a throwaway client."""
    client = ExplorerClient(config, transport)
    return client.fetch_range(
        from_height, to_height, sink, checkpoint_path=checkpoint_path, diagnostics=diagnostics
    )
