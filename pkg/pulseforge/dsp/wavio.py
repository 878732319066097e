"""WAV (RIFF) reading and writing via soundfile.

Only 16-bit PCM and 32-bit IEEE float are accepted. 16-bit conversion is done
here rather than by libsndfile so the quantization step is exactly 1/32768.
"""

import logging
from pathlib import Path
from typing import Literal

import numpy as np
import soundfile as sf

from ..errors import AudioFormatError, ShapeMismatchError
from .types import Waveform

logger = logging.getLogger(__name__)

WavSubtype = Literal["PCM_16", "FLOAT"]

_PCM_SCALE = 32768.0


def read_wav(path: str | Path) -> list[Waveform]:
    """Read a WAV file, returning one Waveform per channel."""
    path = Path(path)
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        logger.error(f"Cannot open {path}: {e}")
        raise AudioFormatError(f"{path}: corrupt or unreadable WAV header ({e})") from e

    if info.format != "WAV":
        raise AudioFormatError(f"{path}: container {info.format} is not WAV")
    if info.subtype == "PCM_16":
        data, rate = sf.read(str(path), dtype="int16", always_2d=True)
        samples = data.astype(np.float64) / _PCM_SCALE
    elif info.subtype == "FLOAT":
        data, rate = sf.read(str(path), dtype="float32", always_2d=True)
        samples = data.astype(np.float64)
    else:
        raise AudioFormatError(
            f"{path}: unsupported codec {info.subtype}; expected PCM_16 or FLOAT"
        )
    return [Waveform(samples[:, c], int(rate)) for c in range(samples.shape[1])]


def read_mono(path: str | Path) -> Waveform:
    """Read a WAV file that must hold exactly one channel."""
    channels = read_wav(path)
    if len(channels) != 1:
        raise ShapeMismatchError(f"{path}: expected mono, found {len(channels)} channels")
    return channels[0]


def write_wav(
    path: str | Path, wave: Waveform | list[Waveform], subtype: WavSubtype = "FLOAT"
) -> Path:
    """Write one or more equal-length channels to a WAV file.

    Args:
        path: Destination; parent directories are created.
        wave: A Waveform, or a list of Waveforms written as channels.
        subtype: ``FLOAT`` (lossless for float32 data) or ``PCM_16``.

    Returns:
        The path written.
    """
    channels = [wave] if isinstance(wave, Waveform) else list(wave)
    if not channels:
        raise ShapeMismatchError("write_wav needs at least one channel")
    rate = channels[0].sample_rate
    length = len(channels[0])
    for channel in channels[1:]:
        if channel.sample_rate != rate or len(channel) != length:
            raise ShapeMismatchError(
                "all channels must share sample rate and length to be written together"
            )

    stacked = np.stack([c.samples for c in channels], axis=1)
    if subtype == "PCM_16":
        data = np.clip(np.round(stacked * _PCM_SCALE), -32768, 32767).astype(np.int16)
    elif subtype == "FLOAT":
        data = stacked.astype(np.float32)
    else:
        raise AudioFormatError(f"unsupported codec {subtype}")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), data, rate, subtype=subtype, format="WAV")
    logger.debug(f"Wrote {path} ({len(channels)} ch, {length} samples, {subtype})")
    return path
