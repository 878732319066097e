"""
Synthetic paired close-talk / far-field corpus.

Speech is a sequence of harmonic bursts with a syllabic amplitude envelope and
occasional fricative hiss, so it carries energy up to Nyquist. The close-talk
microphone records the dry speech plus weak noise; every far-field microphone
records a delayed, attenuated copy with a short decaying echo, plus strong
noise. Simulated and real-proxy records differ in noise colour and echo length.
Real-proxy close-talk files additionally get a random cross-device offset and
gain, which synchronization has to undo.
"""

import logging
from pathlib import Path

import numpy as np
from scipy import signal

from ..config import Domain, SimCorpusConfig, Split
from ..dsp.types import Waveform
from ..dsp.wavio import write_wav
from ..seeding import named_rng
from .manifest import CorpusManifest, MixtureRecord, OracleInfo

logger = logging.getLogger(__name__)

SPLITS: tuple[Split, ...] = ("train", "val", "test")
_SPEECH_RMS = 0.05
_ECHO_DECAY_MS: dict[Domain, float] = {"simu": 8.0, "real": 20.0}


def speech_like(rng: np.random.Generator, num_samples: int, sample_rate: int) -> np.ndarray:
    """Voiced harmonic bursts and unvoiced fricatives spanning the full band.

    Harmonics run up to 0.95 Nyquist with a gentle spectral tilt; fricatives are
    high-passed noise bursts placed in the pauses between syllables.
    """
    out = np.zeros(num_samples)
    nyquist = sample_rate / 2
    fricative_sos = signal.butter(
        4, 0.25 * nyquist, btype="highpass", fs=sample_rate, output="sos"
    )
    position = int(rng.integers(0, int(0.03 * sample_rate)))
    while position < num_samples:
        length = int(rng.uniform(0.12, 0.3) * sample_rate)
        gap = int(rng.uniform(0.0, 0.05) * sample_rate)
        t = np.arange(length) / sample_rate
        f0 = rng.uniform(90.0, 240.0) * (1.0 + 0.05 * np.sin(2 * np.pi * rng.uniform(2, 6) * t))
        phase = 2 * np.pi * np.cumsum(f0) / sample_rate
        formant = rng.uniform(400.0, 2500.0)
        burst = np.zeros(length)
        for k in range(1, int(0.95 * nyquist / f0.max()) + 1):
            weight = k**-0.5 * (1.0 + 2.0 * np.exp(-((k * f0.mean() - formant) / 400.0) ** 2))
            burst += weight * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
        envelope = np.sin(np.pi * np.arange(length) / length) ** 2
        envelope *= 0.5 + 0.5 * rng.uniform()
        burst *= envelope
        end = min(position + length, num_samples)
        out[position:end] += burst[: end - position]
        position += length

        if rng.uniform() < 0.5:
            hiss_length = int(rng.uniform(0.04, 0.12) * sample_rate)
            hiss = signal.sosfilt(fricative_sos, rng.standard_normal(hiss_length))
            hiss *= np.sin(np.pi * np.arange(hiss_length) / hiss_length) ** 2
            hiss *= rng.uniform(0.3, 0.8) * np.sqrt(np.mean(burst**2) / np.mean(hiss**2))
            end = min(position + hiss_length, num_samples)
            if end > position:
                out[position:end] += hiss[: end - position]
            position += hiss_length
        position += gap

    sos = signal.butter(2, 80.0, btype="highpass", fs=sample_rate, output="sos")
    out = signal.sosfilt(sos, out)
    return out * (_SPEECH_RMS / np.sqrt(np.mean(out**2)))


def shaped_noise(
    rng: np.random.Generator, num_samples: int, sample_rate: int, domain: Domain
) -> np.ndarray:
    """Domain-specific coloured noise, unit RMS."""
    white = rng.standard_normal(num_samples)
    if domain == "simu":
        noise = signal.lfilter([1.0], [1.0, -0.9], white)
    else:
        nyquist = sample_rate / 2
        band = signal.butter(
            2, [300.0, min(2000.0, 0.8 * nyquist)], btype="bandpass", fs=sample_rate, output="sos"
        )
        rumble = signal.butter(2, 200.0, btype="lowpass", fs=sample_rate, output="sos")
        noise = signal.sosfilt(band, white) + 3.0 * signal.sosfilt(
            rumble, rng.standard_normal(num_samples)
        )
    return noise / np.sqrt(np.mean(noise**2))


def propagation_response(
    rng: np.random.Generator, sample_rate: int, delay_ms: float, gain: float, domain: Domain
) -> np.ndarray:
    """Integer delay, gain and a short exponentially decaying echo tail."""
    delay = int(round(delay_ms * sample_rate / 1000.0))
    decay = _ECHO_DECAY_MS[domain] * sample_rate / 1000.0
    tail_length = int(4 * decay)
    response = np.zeros(delay + 1 + tail_length)
    response[delay] = gain
    tail = rng.standard_normal(tail_length) * np.exp(-np.arange(1, tail_length + 1) / decay)
    response[delay + 1 :] = 0.3 * gain * tail / np.sqrt(decay)
    return response


def scale_to_snr(speech: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    """Noise rescaled so that ``10 log10(|speech|^2 / |noise|^2) == snr_db``."""
    return noise * np.sqrt(np.sum(speech**2) / (np.sum(noise**2) * 10.0 ** (snr_db / 10.0)))


def shift_samples(samples: np.ndarray, offset: int) -> np.ndarray:
    """Delay (positive) or advance (negative) with zero fill, keeping the length."""
    out = np.zeros_like(samples)
    if offset >= 0:
        out[offset:] = samples[: len(samples) - offset]
    else:
        out[:offset] = samples[-offset:]
    return out


def _write(directory: Path, name: str, samples: np.ndarray, rate: int) -> Path:
    return write_wav(directory / name, Waveform(samples, rate), subtype="FLOAT")


def simulate_record(
    config: SimCorpusConfig, split: Split, domain: Domain, index: int, directory: Path
) -> MixtureRecord:
    """Generate and write one utterance; ``directory`` is the split directory."""
    rng = named_rng(config.seed, f"corpus/{split}/{domain}/{index}")
    rate = config.sample_rate
    record_id = f"{split}-{domain}-{index:04d}"
    folder = directory / record_id

    num_samples = int(rng.uniform(*config.utterance_seconds) * rate)
    speech = speech_like(rng, num_samples, rate)

    far_snr = float(rng.uniform(*config.far_field_snr_db))
    delays = [float(rng.uniform(*config.propagation_delay_ms)) for _ in range(config.channels)]
    gains = [float(rng.uniform(*config.propagation_gain)) for _ in range(config.channels)]
    far_paths, clean_paths, noise_paths = [], [], []
    for channel in range(config.channels):
        response = propagation_response(rng, rate, delays[channel], gains[channel], domain)
        image = signal.fftconvolve(speech, response)[:num_samples]
        noise = scale_to_snr(image, shaped_noise(rng, num_samples, rate, domain), far_snr)
        tag = f"ch{channel + 1}"
        far_paths.append(_write(folder, f"far_{tag}.wav", image + noise, rate))
        clean_paths.append(_write(folder, f"clean_{tag}.wav", image, rate))
        noise_paths.append(_write(folder, f"noise_{tag}.wav", noise, rate))

    close_snr = float(rng.uniform(*config.close_talk_snr_db))
    close_noise = scale_to_snr(speech, shaped_noise(rng, num_samples, rate, domain), close_snr)
    offset_ms = float(rng.uniform(*config.offset_ms)) if domain == "real" else 0.0
    device_gain = float(rng.uniform(0.5, 1.5)) if domain == "real" else 1.0
    offset = int(round(offset_ms * rate / 1000.0))
    close_clean = device_gain * shift_samples(speech, offset)
    close_mix = device_gain * shift_samples(speech + close_noise, offset)
    close_path = _write(folder, "close_talk.wav", close_mix, rate)
    close_clean_path = _write(folder, "close_talk_clean.wav", close_clean, rate)

    def relative(path: Path) -> str:
        return path.relative_to(directory).as_posix()

    oracle = OracleInfo(
        clean_paths=[relative(p) for p in clean_paths],
        noise_paths=[relative(p) for p in noise_paths],
        close_talk_clean_path=relative(close_clean_path),
        injected_offset_ms=offset * 1000.0 / rate,
        injected_gain=device_gain,
        true_snr_db=far_snr,
        close_talk_snr_db=close_snr,
        propagation_delay_ms=delays,
        propagation_gain=gains,
        expected_delay_ms=offset * 1000.0 / rate - float(np.mean(delays)),
    )
    return MixtureRecord(
        id=record_id,
        domain=domain,
        far_field_paths=[relative(p) for p in far_paths],
        close_talk_path=relative(close_path),
        oracle=oracle,
    )


def simulate_corpus(config: SimCorpusConfig, out_dir: str | Path) -> dict[Split, CorpusManifest]:
    """Write every split under ``out_dir/<split>/`` with a ``manifest.jsonl`` each."""
    out_dir = Path(out_dir)
    manifests: dict[Split, CorpusManifest] = {}
    for split in SPLITS:
        directory = out_dir / split
        sizes = config.num_utterances.get(split)
        records = []
        if sizes is not None:
            for domain, count in (("simu", sizes.simu), ("real", sizes.real)):
                for index in range(count):
                    records.append(simulate_record(config, split, domain, index, directory))
        manifest = CorpusManifest(
            records=records, sample_rate=config.sample_rate, split=split, root=directory
        )
        manifest.write(directory / "manifest.jsonl")
        manifests[split] = manifest
        logger.info(f"Simulated {split}: {len(records)} records")
    return manifests
