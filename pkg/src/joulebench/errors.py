"""Exception taxonomy shared across the package."""

from __future__ import annotations


class BenchError(Exception):
    """Base class for all joulebench errors."""


class ConfigError(BenchError):
    """Invalid benchmark configuration; carries all violations at once."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class DatasetError(BenchError):
    """Dataset file missing, empty, or malformed."""


class MalformedRecord(DatasetError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {reason}")


class InsufficientPrompts(BenchError):
    def __init__(self, have: int, need: int):
        self.have = have
        self.need = need
        super().__init__(f"dataset has {have} prompts but the largest load needs {need}")


class EndpointUnreachable(BenchError):
    """The completions endpoint did not accept a connection."""


class DispatchAborted(BenchError):
    """A run produced zero successful responses."""


class NoSources(BenchError):
    """Tracker started (or source resolution ran) with no power sources."""


class SourceInitFailure(BenchError):
    def __init__(self, source_id: str, reason: str):
        self.source_id = source_id
        super().__init__(f"power source {source_id!r} failed to initialize: {reason}")


class TrackerNotRunning(BenchError):
    """stop() called on a tracker that is not running."""


class UnsortedSamples(BenchError):
    """Per-source sample timestamps are not strictly increasing."""


class SampleOutsideWindow(BenchError):
    """A sample timestamp falls outside the measurement window."""


class UnknownSource(BenchError):
    def __init__(self, source_id: str, known: list[str]):
        self.source_id = source_id
        super().__init__(f"source {source_id!r} not in result (known: {', '.join(sorted(known)) or 'none'})")


class AnalysisError(BenchError):
    """Bad input to a metric computation (empty, degenerate, too few points)."""


class SchemaMismatch(BenchError):
    def __init__(self, found: object, expected: int):
        super().__init__(f"report schema version {found!r}, expected {expected}")
