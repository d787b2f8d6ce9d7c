"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: validation-style errors exit 2,
IO/runtime errors exit 1.
"""


class AlsimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AlsimError):
    """Malformed or invalid experiment configuration."""


class DataError(AlsimError):
    """Raw or converted corpus violates the dataset conventions."""


class SpanTasksUnsupportedError(AlsimError):
    """Span-labeled corpora convert fine but cannot be simulated."""


class CorruptArtifactError(AlsimError):
    """Stored artifact failed its integrity check (digest, truncation)."""


class StoreError(AlsimError):
    """Run store is unreadable or structurally inconsistent."""


class NonFiniteLossError(AlsimError):
    """Training loss became NaN/inf; message names the offending step."""


class InterruptedRunError(AlsimError):
    """Seed run aborted cooperatively (signal or injected fault)."""
