"""Exception types shared across the package."""


class TxGraphError(Exception):
    """Base class for all txgraph errors."""


class InputError(TxGraphError):
    """Malformed or invalid user input: records, payloads, configuration."""


class ParseError(InputError):
    """A record stream could not be parsed at a specific line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class RecordError(InputError):
    """A transaction record violates an invariant."""


class SchemaError(InputError):
    """An explorer payload does not match the expected JSON shape."""


class NotFoundError(InputError):
    """The explorer reports no block at the requested height."""


class ExplorerError(TxGraphError):
    """Transport-level explorer failure."""


class PermanentHTTPError(ExplorerError):
    """A non-retryable HTTP status (4xx other than 429)."""

    def __init__(self, status: int, url: str):
        super().__init__(f"HTTP {status} for {url}")
        self.status = status


class RetriesExhaustedError(ExplorerError):
    """Transient failures persisted beyond the configured retry budget."""


class UndefinedMetricError(TxGraphError):
    """The statistic has no defined value on this input.

    Report writers render these as empty cells rather than zeros.
    """


class CapExceededError(TxGraphError):
    """The graph is too large for an exact computation guarded by a node cap."""
