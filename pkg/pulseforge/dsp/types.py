"""
Signal containers shared by every pulseforge module.

Waveforms and spectrograms are immutable value objects holding double-precision
numpy arrays; file I/O converts to single precision at the boundary.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ..config import StftConfig
from ..errors import ShapeMismatchError, SignalError


@dataclass(frozen=True)
class Waveform:
    """Mono time-domain signal."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ShapeMismatchError(
                f"Waveform samples must be 1-D, got shape {samples.shape}"
            )
        if self.sample_rate <= 0:
            raise SignalError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise SignalError("Waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(samples, self.sample_rate)

    def scaled(self, gain: float) -> "Waveform":
        return Waveform(self.samples * gain, self.sample_rate)


@dataclass(frozen=True)
class SignalGeometry:
    """What istft needs besides the coefficients: config, rate and signal length."""

    config: StftConfig
    sample_rate: int
    length: int


@dataclass(frozen=True)
class Spectrogram:
    """Complex STFT matrix indexed (frame, bin)."""

    data: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)
    sample_rate: int = 16000
    length: int | None = None

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.complex128)
        if data.ndim != 2:
            raise ShapeMismatchError(
                f"Spectrogram data must be (frames, bins), got shape {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise SignalError("Spectrogram contains non-finite coefficients")
        object.__setattr__(self, "data", data)
        if self.length is None:
            geometry = self.config.geometry(self.sample_rate)
            inferred = (data.shape[0] - 1) * geometry.hop_length - geometry.window_length
            object.__setattr__(self, "length", max(inferred, 0))

    @property
    def num_frames(self) -> int:
        return int(self.data.shape[0])

    @property
    def num_bins(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_frames, self.num_bins

    @property
    def geometry(self) -> SignalGeometry:
        assert self.length is not None
        return SignalGeometry(self.config, self.sample_rate, self.length)

    def with_data(self, data: np.ndarray) -> "Spectrogram":
        """Same framing, new coefficients."""
        data = np.asarray(data)
        if data.shape != self.data.shape:
            raise ShapeMismatchError(
                f"expected shape {self.data.shape}, got {data.shape}"
            )
        return replace(self, data=data)
