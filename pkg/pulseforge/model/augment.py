"""SNR augmentation of simulated mixtures."""

import numpy as np

from ..dsp.types import Waveform
from ..errors import ShapeMismatchError, SignalError


def noise_gain_for_shift(shift_db: float) -> float:
    """Noise amplitude factor that raises the mixture SNR by ``shift_db``."""
    return float(10.0 ** (-shift_db / 20.0))


def draw_snr_shift(rng: np.random.Generator, snr_range: tuple[float, float]) -> float:
    low, high = snr_range
    return float(rng.uniform(low, high))


def snr_augment(speech: Waveform, noise: Waveform, shift_db: float) -> Waveform:
    """Rescale the noise so the mixture SNR changes by exactly ``shift_db``.

    Returns:
        ``speech + 10^(-shift_db/20) * noise``.
    """
    if len(speech) != len(noise):
        raise ShapeMismatchError(f"speech has {len(speech)} samples, noise has {len(noise)}")
    if speech.energy <= 0 or noise.energy <= 0:
        raise SignalError("SNR augmentation needs non-zero speech and noise")
    return speech.with_samples(speech.samples + noise_gain_for_shift(shift_db) * noise.samples)


def snr_db(speech: np.ndarray, noise: np.ndarray) -> float:
    """Energy ratio of two signals in dB."""
    return float(10.0 * np.log10(np.sum(speech**2) / np.sum(noise**2)))
