"""
Square-root Hann STFT analysis and overlap-add synthesis.

One torch implementation backs both the numpy-facing ``stft``/``istft`` and the
differentiable tensor versions used inside training losses.

Conventions:
  - FFT length is the window length rounded up to the next power of two; the
    frame is zero-padded on the right to that length before the transform.
  - Signals are zero-padded by one window on the left and by one window (plus
    whatever completes the last hop) on the right, so every sample is covered by
    a full set of overlapping frames; ``istft`` trims the padding again.
  - Synthesis divides the overlap-added frames by the overlap-added squared
    window, which makes the round trip exact for every covered sample.
  - Energy: with R = window/hop >= 2 the squared window overlap-adds to R/2, so
    ``spectral_energy(stft(x)) == n_fft * R/2 * ||x||^2`` (see ``energy_scale``).
"""

import numpy as np
import torch
import torch.nn.functional as F

from ..config import FrameGeometry, StftConfig
from ..errors import ShapeMismatchError, SignalError
from .types import Spectrogram, Waveform

_ENVELOPE_FLOOR = 1e-10


def sqrt_hann(window_length: int, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    """Periodic square-root Hann window."""
    return torch.hann_window(window_length, periodic=True, dtype=dtype).sqrt()


def _padding(length: int, geometry: FrameGeometry) -> tuple[int, int]:
    window, hop = geometry.window_length, geometry.hop_length
    extra = (-(length + window)) % hop
    return window, window + extra


def frame_count(length: int, config: StftConfig, sample_rate: int) -> int:
    """Number of STFT frames produced for a signal of ``length`` samples."""
    geometry = config.geometry(sample_rate)
    left, right = _padding(length, geometry)
    return (length + left + right - geometry.window_length) // geometry.hop_length + 1


def stft_tensor(
    signal: torch.Tensor, config: StftConfig, sample_rate: int
) -> torch.Tensor:
    """STFT over the last axis: ``(..., N)`` real -> ``(..., T, F)`` complex."""
    geometry = config.geometry(sample_rate)
    length = signal.shape[-1]
    if length < geometry.window_length:
        raise SignalError(
            f"input too short: {length} samples, one window is "
            f"{geometry.window_length}"
        )
    left, right = _padding(length, geometry)
    padded = F.pad(signal, (left, right))
    frames = padded.unfold(-1, geometry.window_length, geometry.hop_length)
    window = sqrt_hann(geometry.window_length, dtype=signal.dtype)
    return torch.fft.rfft(frames * window, n=geometry.n_fft, dim=-1)


def istft_tensor(
    spec: torch.Tensor, config: StftConfig, sample_rate: int, length: int
) -> torch.Tensor:
    """Inverse of ``stft_tensor``: ``(..., T, F)`` complex -> ``(..., length)`` real."""
    geometry = config.geometry(sample_rate)
    if spec.shape[-1] != geometry.num_bins:
        raise ShapeMismatchError(
            f"spectrogram has {spec.shape[-1]} bins but config implies "
            f"{geometry.num_bins}"
        )
    window_length, hop = geometry.window_length, geometry.hop_length
    num_frames = spec.shape[-2]
    padded_length = (num_frames - 1) * hop + window_length
    if window_length + length > padded_length:
        raise ShapeMismatchError(
            f"{num_frames} frames cannot hold a signal of {length} samples"
        )

    window = sqrt_hann(window_length, dtype=spec.real.dtype)
    frames = torch.fft.irfft(spec, n=geometry.n_fft, dim=-1)[..., :window_length]
    frames = frames * window

    leading = frames.shape[:-2]
    columns = frames.reshape(-1, num_frames, window_length).transpose(1, 2)
    fold = dict(output_size=(1, padded_length), kernel_size=(1, window_length),
                stride=(1, hop))
    summed = F.fold(columns, **fold).reshape(*leading, padded_length)

    weights = (window**2).reshape(1, window_length, 1).expand(1, window_length, num_frames)
    envelope = F.fold(weights, **fold).reshape(padded_length)
    covered = envelope > _ENVELOPE_FLOOR
    signal = torch.where(covered, summed / torch.where(covered, envelope, 1.0), 0.0)
    return signal[..., window_length : window_length + length]


def stft(wave: Waveform, config: StftConfig) -> Spectrogram:
    """Analyse a waveform into a complex spectrogram."""
    coefficients = stft_tensor(
        torch.from_numpy(wave.samples), config, wave.sample_rate
    )
    return Spectrogram(
        coefficients.numpy(), config, wave.sample_rate, length=len(wave)
    )


def istft(spec: Spectrogram) -> Waveform:
    """Resynthesize a waveform of the spectrogram's recorded length."""
    assert spec.length is not None
    samples = istft_tensor(
        torch.from_numpy(spec.data), spec.config, spec.sample_rate, spec.length
    )
    return Waveform(samples.numpy(), spec.sample_rate)


def energy_scale(config: StftConfig, sample_rate: int) -> float:
    """Ratio ``spectral_energy(stft(x)) / ||x||^2`` for overlap of at least 2."""
    geometry = config.geometry(sample_rate)
    return geometry.n_fft * geometry.window_length / (2.0 * geometry.hop_length)


def spectral_energy(spec: Spectrogram) -> float:
    """Energy of the full (two-sided) spectrum implied by a one-sided one."""
    geometry = spec.config.geometry(spec.sample_rate)
    weights = np.full(spec.num_bins, 2.0)
    weights[0] = 1.0
    if geometry.n_fft % 2 == 0:
        weights[-1] = 1.0
    return float(np.sum(np.abs(spec.data) ** 2 * weights))
