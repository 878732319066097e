"""
Frame-level close-talk / far-field synchronization.

For every frequency, the magnitude sequence of a microphone over time is
transformed with a T-point FFT; candidate delays are scored by summing the
phase-transformed cross-spectra (GCC-PHAT) over frequencies and microphones.

Sign convention: numpy's forward FFT uses e^{-i}, so a close-talk sequence that
lags the far-field by k frames has phase difference -2*pi*t*k/T. The score adds
the steering term, ``cos(angle(R0) - angle(Rp) + 2*pi*t*d/T)``, which peaks at
d = k. A positive estimate therefore means the close-talk lags and is advanced.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..config import SyncConfig
from ..dsp.stft import stft
from ..dsp.types import Spectrogram, Waveform
from ..errors import ShapeMismatchError

logger = logging.getLogger(__name__)

# Bins this far below the strongest one carry no usable phase.
_ZERO_MAGNITUDE = 1e-12
_TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class MagnitudeSequenceSet:
    """Per-frequency magnitude sequences of one microphone and their FFTs.

    Attributes:
        magnitudes: Real (F, T) array, ``magnitudes[f, t] = |Y(t, f)|``.
        spectra: Complex (F, T) array, T-point FFT of each row.
    """

    magnitudes: np.ndarray
    spectra: np.ndarray

    @property
    def num_frames(self) -> int:
        return int(self.magnitudes.shape[1])

    @property
    def num_bins(self) -> int:
        return int(self.magnitudes.shape[0])

    def phase_mask(self) -> np.ndarray:
        """True where the FFT bin has a defined phase."""
        size = np.abs(self.spectra)
        peak = size.max(initial=0.0)
        return size > _ZERO_MAGNITUDE * peak if peak > 0 else np.zeros_like(size, bool)


@dataclass(frozen=True)
class SyncResult:
    aligned: Waveform
    delay_frames: int


def magnitude_sequences(spec: Spectrogram) -> MagnitudeSequenceSet:
    magnitudes = np.abs(spec.data).T
    return MagnitudeSequenceSet(magnitudes, np.fft.fft(magnitudes, axis=-1))


def _check_compatible(
    close: MagnitudeSequenceSet, far: list[MagnitudeSequenceSet]
) -> None:
    for index, other in enumerate(far):
        if other.magnitudes.shape != close.magnitudes.shape:
            raise ShapeMismatchError(
                f"far-field microphone {index} has (F, T) = {other.magnitudes.shape}, "
                f"close-talk has {close.magnitudes.shape}"
            )


def _phase_accumulator(
    close: MagnitudeSequenceSet, far: list[MagnitudeSequenceSet]
) -> np.ndarray:
    """Sum over microphones and frequencies of exp(i * phase difference), per t."""
    close_mask = close.phase_mask()
    close_phase = np.angle(close.spectra)
    total = np.zeros(close.num_frames, dtype=np.complex128)
    for other in far:
        mask = close_mask & other.phase_mask()
        unit = np.where(mask, np.exp(1j * (close_phase - np.angle(other.spectra))), 0.0)
        total += unit.sum(axis=0)
    return total


def _scores(accumulator: np.ndarray, delays: np.ndarray) -> np.ndarray:
    num_frames = accumulator.shape[0]
    t = np.arange(num_frames)
    steering = np.exp(2j * np.pi * np.outer(delays, t) / num_frames)
    return np.real(steering @ accumulator)


def gcc_phat_score(
    close: MagnitudeSequenceSet, far: list[MagnitudeSequenceSet], delay: int
) -> float:
    """GCC-PHAT score of a single candidate delay (in frames)."""
    _check_compatible(close, far)
    if abs(delay) > close.num_frames / 2:
        raise ShapeMismatchError(
            f"delay {delay} exceeds half the sequence length {close.num_frames}"
        )
    accumulator = _phase_accumulator(close, far)
    return float(_scores(accumulator, np.array([delay]))[0])


def estimate_frame_delay(
    close: MagnitudeSequenceSet, far: list[MagnitudeSequenceSet], config: SyncConfig
) -> int:
    """Delay in frames maximizing the GCC-PHAT score over the candidate set.

    Ties (scores within a relative 1e-9 of the best) go to the smallest |d|, then
    to the negative delay.
    """
    _check_compatible(close, far)
    limit = min(config.max_delay_frames, close.num_frames // 2)
    delays = np.arange(-limit, limit + 1)
    scores = _scores(_phase_accumulator(close, far), delays)
    best = scores.max()
    tolerance = _TIE_TOLERANCE * max(abs(best), 1.0)
    tied = delays[scores >= best - tolerance]
    return int(min(tied, key=lambda d: (abs(d), d)))


def apply_frame_shift(wave: Waveform, delay_frames: int, config: SyncConfig) -> Waveform:
    """Advance (positive) or delay (negative) a waveform by whole frames.

    The length is preserved; vacated samples are zero.
    """
    hop = config.stft.geometry(wave.sample_rate).hop_length
    shift = delay_frames * hop
    samples = wave.samples
    shifted = np.zeros_like(samples)
    if shift == 0:
        shifted[:] = samples
    elif abs(shift) < len(samples):
        if shift > 0:
            shifted[:-shift] = samples[shift:]
        else:
            shifted[-shift:] = samples[:shift]
    return wave.with_samples(shifted)


def synchronize_pair(close: Waveform, far: list[Waveform], config: SyncConfig) -> SyncResult:
    """Estimate the close-talk offset against the far-field channels and undo it."""
    if not far:
        raise ShapeMismatchError("synchronization needs at least one far-field channel")
    for channel in far:
        if channel.sample_rate != close.sample_rate:
            raise ShapeMismatchError(
                f"sample rates differ: close-talk {close.sample_rate} Hz, "
                f"far-field {channel.sample_rate} Hz"
            )

    length = min(len(close), *(len(channel) for channel in far))
    close_sequences = magnitude_sequences(
        stft(close.with_samples(close.samples[:length]), config.stft)
    )
    far_sequences = [
        magnitude_sequences(stft(channel.with_samples(channel.samples[:length]), config.stft))
        for channel in far
    ]
    delay = estimate_frame_delay(close_sequences, far_sequences, config)
    return SyncResult(apply_frame_shift(close, delay, config), delay)
