"""Exception hierarchy shared across the pipeline."""


class SrlpError(Exception):
    """Base class for all pipeline errors."""


class FormatError(SrlpError):
    """Malformed input file; message names the file location."""

    def __init__(self, message, path=None, line=None, offset=None):
        loc = path or ""
        if line is not None:
            loc += f" line {line}"
        if offset is not None:
            loc += f" (byte {offset})"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line
        self.offset = offset


class ValidationError(SrlpError):
    """Structurally valid input violating a domain invariant."""


class NoEntryPrice(SrlpError):
    """No usable minute bar at/after publication within the allowed window."""


class NoExitPrice(SrlpError):
    """Price data ends before the configured exit horizon."""


class NotDefined(SrlpError):
    """Metric undefined for the given inputs (e.g. zero-variance Sharpe)."""


class Ruin(SrlpError):
    """Simulated equity dropped to zero or below."""


class ConfigError(SrlpError):
    """Invalid configuration value or file."""


class CheckpointError(SrlpError):
    """Checkpoint file corrupt or inconsistent with its config block."""


class TrainingDiverged(SrlpError):
    """Non-finite loss or gradient encountered during training."""
