"""Signal containers, STFT and WAV I/O."""

from .stft import (
    energy_scale,
    frame_count,
    istft,
    istft_tensor,
    spectral_energy,
    sqrt_hann,
    stft,
    stft_tensor,
)
from .types import SignalGeometry, Spectrogram, Waveform
from .wavio import read_mono, read_wav, write_wav

__all__ = [
    "Waveform",
    "Spectrogram",
    "SignalGeometry",
    "stft",
    "istft",
    "stft_tensor",
    "istft_tensor",
    "sqrt_hann",
    "frame_count",
    "energy_scale",
    "spectral_energy",
    "read_wav",
    "read_mono",
    "write_wav",
]
