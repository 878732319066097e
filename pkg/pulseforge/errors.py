"""
Exception hierarchy for pulseforge.

Library code raises these; the CLI maps them (and pydantic validation errors)
to exit code 2.
"""

from typing import Any


class PulseforgeError(Exception):
    """Base class for all pulseforge errors."""


class SignalError(PulseforgeError):
    """A waveform or spectrogram cannot be processed (too short, silent, non-finite)."""


class ShapeMismatchError(PulseforgeError):
    """Operands disagree in frames, bins, channels or length."""


class RankDeficientError(PulseforgeError):
    """Normal equations are singular for the requested ridge."""

    def __init__(self, message: str = "rank-deficient; increase ridge") -> None:
        super().__init__(message)


class AudioFormatError(PulseforgeError):
    """WAV file uses an unsupported codec or has a corrupt header."""


class ManifestError(PulseforgeError):
    """Corpus manifest violates its invariants."""


class CheckpointError(PulseforgeError):
    """Checkpoint file is not a readable pulseforge checkpoint."""


class NonFiniteLossError(PulseforgeError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigurationError(PulseforgeError, ValueError):
    """A configuration is internally inconsistent for the data it is applied to."""
