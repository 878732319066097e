"""Tests for GCC-PHAT frame synchronization."""

import numpy as np
import pytest

from pulseforge.config import SimCorpusConfig, SyncConfig
from pulseforge.dsp import Spectrogram, Waveform
from pulseforge.errors import ShapeMismatchError
from pulseforge.pipeline.simulate import (
    propagation_response,
    scale_to_snr,
    shaped_noise,
    shift_samples,
    speech_like,
)
from pulseforge.sync import (
    apply_frame_shift,
    estimate_frame_delay,
    gcc_phat_score,
    magnitude_sequences,
    synchronize_pair,
)

SYNC = SyncConfig()


def _sequences(data: np.ndarray):
    return magnitude_sequences(Spectrogram(data))


@pytest.fixture
def close_data(rng) -> np.ndarray:
    return rng.standard_normal((64, 257)) + 1j * rng.standard_normal((64, 257))


class TestMagnitudeSequences:
    def test_silence(self):
        """Silence has no magnitudes and no usable phase."""
        sequences = _sequences(np.zeros((32, 257)))

        assert np.all(sequences.magnitudes == 0)
        assert np.all(sequences.spectra == 0)
        assert not sequences.phase_mask().any()

    def test_constant_magnitude_lives_at_dc(self):
        """A constant magnitude sequence is pure DC."""
        sequences = _sequences(np.full((32, 257), 2.0 + 0j))

        np.testing.assert_allclose(sequences.spectra[:, 1:], 0, atol=1e-9)
        np.testing.assert_allclose(sequences.spectra[:, 0], 64.0)

    def test_inverse_fft_recovers_magnitudes(self, close_data):
        """The stored spectra invert back to the magnitudes."""
        sequences = _sequences(close_data)

        np.testing.assert_allclose(
            np.fft.ifft(sequences.spectra, axis=-1).real, np.abs(close_data).T, atol=1e-12
        )


class TestScore:
    def test_identical_copies_score_every_valid_term(self, close_data):
        """Identical copies score one per valid term and channel."""
        close = _sequences(close_data)
        far = [_sequences(close_data), _sequences(close_data)]
        valid = np.count_nonzero(close.phase_mask())

        assert gcc_phat_score(close, far, 0) == pytest.approx(2 * valid)

    def test_circular_shift_is_found(self, close_data):
        """A circular shift is the argmax of the score."""
        k = 5
        close = _sequences(close_data)
        far = [_sequences(np.roll(close_data, -k, axis=0))]
        scores = {d: gcc_phat_score(close, far, d) for d in range(-20, 21)}

        assert max(scores, key=scores.get) == k
        assert estimate_frame_delay(close, far, SYNC) == k

    def test_preshifting_close_talk_moves_estimate(self, close_data):
        """Advancing the close-talk signal reduces the estimate by as much."""
        k, s = 7, 3
        far = [_sequences(np.roll(close_data, -k, axis=0))]
        advanced = _sequences(np.roll(close_data, -s, axis=0))

        assert estimate_frame_delay(advanced, far, SYNC) == k - s

    def test_independent_sequences_score_low(self, rng, close_data):
        """Unrelated sequences score far below the bound."""
        close = _sequences(close_data)
        far = [
            _sequences(rng.standard_normal((64, 257)) + 1j * rng.standard_normal((64, 257)))
            for _ in range(2)
        ]
        bound = 2 * 64 * 257

        for d in (-10, 0, 10):
            assert abs(gcc_phat_score(close, far, d)) < 0.2 * bound

    def test_ties_go_to_zero(self):
        """A flat score resolves to zero delay."""
        flat = _sequences(np.ones((40, 257)) + 0j)

        assert estimate_frame_delay(flat, [flat], SYNC) == 0

    def test_shape_mismatch(self, close_data):
        """Sequences of different length are rejected."""
        with pytest.raises(ShapeMismatchError):
            gcc_phat_score(_sequences(close_data), [_sequences(close_data[:50])], 0)

    def test_delay_beyond_half_length(self, close_data):
        """Delays past half the sequence length are rejected."""
        with pytest.raises(ShapeMismatchError):
            gcc_phat_score(_sequences(close_data), [_sequences(close_data)], 40)


class TestFrameShift:
    def test_zero_shift_is_identity(self, rng):
        """A zero shift leaves the waveform unchanged."""
        wave = Waveform(rng.standard_normal(500))
        np.testing.assert_array_equal(apply_frame_shift(wave, 0, SYNC).samples, wave.samples)

    def test_positive_shift_advances(self, rng):
        """A positive shift advances by whole hops and zero-fills the end."""
        wave = Waveform(rng.standard_normal(500))
        shifted = apply_frame_shift(wave, 2, SYNC)

        assert len(shifted) == 500
        np.testing.assert_array_equal(shifted.samples[:-32], wave.samples[32:])
        assert np.all(shifted.samples[-32:] == 0)

    def test_shift_and_unshift_restore_interior(self, rng):
        """Shifting back restores everything but the vacated edge."""
        wave = Waveform(rng.standard_normal(500))
        back = apply_frame_shift(apply_frame_shift(wave, -3, SYNC), 3, SYNC)

        np.testing.assert_array_equal(back.samples[:-48], wave.samples[:-48])


def test_synchronize_delayed_close_talk(rng):
    """A 17-frame delay is found and undone."""
    sr = 16000
    speech = speech_like(rng, 2 * sr, sr)
    far = [
        Waveform(speech + 0.05 * rng.standard_normal(speech.size), sr) for _ in range(2)
    ]
    close = Waveform(shift_samples(speech, 17 * 16), sr)

    result = synchronize_pair(close, far, SYNC)

    assert result.delay_frames == 17
    np.testing.assert_allclose(
        result.aligned.samples[: -17 * 16], speech[: -17 * 16], atol=1e-12
    )


@pytest.mark.parametrize("offset_frames", [-45, -12, 0, 7, 38])
def test_recovers_whole_frame_offsets_in_noise(rng, offset_frames):
    """Broadband speech at -5 dB far-field SNR; offsets come back to the exact frame."""
    sr = 16000
    speech = speech_like(rng, sr, sr)
    far = []
    for _ in range(6):
        image = np.convolve(
            speech, propagation_response(rng, sr, 0.0, rng.uniform(0.5, 1.0), "real")
        )[: speech.size]
        noise = scale_to_snr(image, shaped_noise(rng, speech.size, sr, "real"), -5.0)
        far.append(Waveform(image + noise, sr))
    close_noise = scale_to_snr(speech, shaped_noise(rng, speech.size, sr, "real"), 20.0)
    close = Waveform(shift_samples(speech + close_noise, offset_frames * 16), sr)

    result = synchronize_pair(close, far, SYNC)

    assert result.delay_frames == offset_frames


def test_synchronize_rejects_rate_mismatch():
    """Channels at another sample rate are rejected."""
    with pytest.raises(ShapeMismatchError):
        synchronize_pair(Waveform(np.zeros(800), 8000), [Waveform(np.zeros(1600), 16000)], SYNC)


@pytest.mark.slow
def test_recovers_injected_offsets(rng):
    """Six-microphone pairs with random offsets in [-50, 50] ms and far-field SNR in [-5, 5] dB."""
    corpus = SimCorpusConfig()
    sr = corpus.sample_rate
    hits = 0
    trials = 200
    for _ in range(trials):
        speech = speech_like(rng, 2 * sr, sr)
        delays_ms = rng.uniform(0.0, 2.0, corpus.channels)
        far = []
        for delay in delays_ms:
            image = np.convolve(
                speech, propagation_response(rng, sr, delay, rng.uniform(0.5, 1.0), "real")
            )[: speech.size]
            noise = shaped_noise(rng, speech.size, sr, "real")
            far.append(
                Waveform(image + scale_to_snr(image, noise, rng.uniform(-5, 5)), sr)
            )
        offset_ms = rng.uniform(-50.0, 50.0)
        close_clean = shift_samples(speech, int(round(offset_ms * sr / 1000)))
        close_noise = scale_to_snr(close_clean, shaped_noise(rng, speech.size, sr, "real"), 20.0)
        close = Waveform(close_clean + close_noise, sr)

        result = synchronize_pair(close, far, SYNC)

        expected = offset_ms - float(np.mean(delays_ms))
        hits += abs(result.delay_frames - expected) <= 1.0

    assert hits >= 0.95 * trials
