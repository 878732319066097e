"""Tests for mini-batch construction and the training loop."""

import math

import pytest
import torch

from pulseforge.config import LOSS_ROWS, AlignConfig, ModelConfig, TrainConfig
from pulseforge.errors import ConfigurationError, NonFiniteLossError, ShapeMismatchError
from pulseforge.model import (
    Batch,
    SpectralMappingNet,
    Trainer,
    TrainingExample,
    compute_gradients,
    evaluation_channel_sets,
    select_channels,
)
from pulseforge.model.training import EVAL_PAIR, FRONT_FIVE

RATE = 1000
SAMPLES = 120


def _train_config(**overrides) -> TrainConfig:
    settings = dict(
        segment_seconds=SAMPLES / RATE,
        learning_rate=1e-5,
        snr_augment=False,
        loss_flags=LOSS_ROWS["3a"],
        max_epochs=2,
        steps_per_epoch=3,
    )
    settings.update(overrides)
    return TrainConfig(**settings)


def _simu_example(rng, name="s0", channels=1) -> TrainingExample:
    speech = rng.standard_normal((channels, SAMPLES + 40))
    noise = 0.5 * rng.standard_normal((channels, SAMPLES + 40))
    return TrainingExample(name, "simu", speech + noise, RATE, speech=speech, noise=noise)


def _real_example(rng, name="r0", channels=1) -> TrainingExample:
    pseudo = rng.standard_normal(SAMPLES + 40)
    mixtures = pseudo[None] + 0.5 * rng.standard_normal((channels, SAMPLES + 40))
    return TrainingExample(name, "real", mixtures, RATE, pseudo=pseudo)


class TestChannels:
    def test_single_channel_in_range(self, rng):
        """Single-channel training picks any one microphone."""
        for _ in range(50):
            [channel] = select_channels(ModelConfig(), 6, rng)
            assert 0 <= channel < 6

    def test_pairs_come_from_front_microphones(self, rng):
        """Two-channel training samples distinct front microphones."""
        config = ModelConfig.for_channels(2)
        for _ in range(50):
            pair = select_channels(config, 6, rng)
            assert len(set(pair)) == 2
            assert set(pair) <= set(FRONT_FIVE)

    def test_six_channels_take_all(self, rng):
        """Six-channel training uses every microphone in order."""
        assert select_channels(ModelConfig.for_channels(6), 6, rng) == list(range(6))

    def test_evaluation_sets(self):
        """Evaluation scores every channel alone, or the fixed pair."""
        assert evaluation_channel_sets(ModelConfig(), 3) == [[0], [1], [2]]
        assert evaluation_channel_sets(ModelConfig.for_channels(2), 6) == [list(EVAL_PAIR)]

    def test_impossible_selection(self, rng):
        """Asking for more channels than recorded is an error."""
        with pytest.raises(ShapeMismatchError):
            select_channels(ModelConfig.for_channels(6), 2, rng)


class TestBatches:
    def test_simulated_batch_shapes(self, rng, tiny_model_config):
        """Simulated batches carry speech and noise, not pseudo-labels."""
        trainer = Trainer(SpectralMappingNet(tiny_model_config), _train_config())

        batch = trainer.make_batch([_simu_example(rng)])

        assert batch.mixtures.shape == (1, 1, SAMPLES)
        assert batch.speech.shape == (1, SAMPLES)
        assert batch.pseudo is None

    def test_short_utterance_is_padded(self, rng, tiny_model_config):
        """Utterances shorter than a segment are zero-padded."""
        trainer = Trainer(SpectralMappingNet(tiny_model_config), _train_config(segment_seconds=0.5))

        batch = trainer.make_batch([_real_example(rng)])

        assert batch.mixtures.shape == (1, 1, 500)
        assert torch.all(batch.pseudo[0, SAMPLES + 40 :] == 0)

    def test_mixed_domains_rejected(self, rng, tiny_model_config):
        """A batch may not mix simulated and real examples."""
        trainer = Trainer(SpectralMappingNet(tiny_model_config), _train_config())
        with pytest.raises(ShapeMismatchError):
            trainer.make_batch([_simu_example(rng), _real_example(rng)])

    def test_augmentation_keeps_speech(self, rng, tiny_model_config):
        """Augmentation rescales the noise and leaves the speech alone."""
        trainer = Trainer(SpectralMappingNet(tiny_model_config), _train_config(snr_augment=True))
        example = _simu_example(rng)

        batch = trainer.make_batch([example])
        noise = batch.mixtures[0, 0] - batch.speech[0]

        torch.testing.assert_close(noise, batch.noise[0])


class TestLoss:
    def test_all_simulated_terms_active(self, rng, tiny_model_config):
        """Row 3a weights all three simulated terms by alpha."""
        trainer = Trainer(SpectralMappingNet(tiny_model_config), _train_config())
        breakdown = trainer.compute_loss(trainer.make_batch([_simu_example(rng)]))

        assert breakdown.speech_simu > 0
        assert breakdown.noise_simu > 0
        assert breakdown.mixture_constraint > 0
        assert breakdown.total == pytest.approx(
            5.0 * (breakdown.speech_simu + breakdown.noise_simu + breakdown.mixture_constraint)
        )

    def test_real_terms_active(self, rng, tiny_model_config):
        """Real batches add the speech and mixture terms unweighted."""
        trainer = Trainer(SpectralMappingNet(tiny_model_config), _train_config())
        breakdown = trainer.compute_loss(trainer.make_batch([_real_example(rng)]))

        assert breakdown.domain == "real"
        assert breakdown.total == pytest.approx(breakdown.speech_real + breakdown.mixture_constraint)

    def test_time_domain_alignment(self, rng, tiny_model_config):
        """Training works with the time-domain filter."""
        trainer = Trainer(
            SpectralMappingNet(tiny_model_config), _train_config(align=AlignConfig.parse("td:8"))
        )
        breakdown = trainer.compute_loss(trainer.make_batch([_real_example(rng)]))

        assert math.isfinite(breakdown.speech_real)

    def test_alpha_scales_simulated_gradients(self, rng, tiny_model_config):
        """Alpha scales simulated gradients exactly."""
        model = SpectralMappingNet(tiny_model_config)
        batch = Trainer(model, _train_config()).make_batch([_simu_example(rng)])

        weighted = Trainer(model, _train_config(alpha=5.0)).compute_loss(batch).objective
        plain = Trainer(model, _train_config(alpha=1.0)).compute_loss(batch).objective
        five = compute_gradients(model, weighted)
        one = compute_gradients(model, plain)

        for name in one:
            torch.testing.assert_close(five[name], 5.0 * one[name], rtol=1e-10, atol=1e-12)

    def test_noise_head_required(self, tiny_model_config):
        """Rows with a noise term need a noise head."""
        model = SpectralMappingNet(tiny_model_config.model_copy(update={"predict_noise": False}))
        with pytest.raises(ConfigurationError):
            Trainer(model, _train_config())
        Trainer(model, _train_config(loss_flags=LOSS_ROWS["1c"]))


class TestSteps:
    def test_small_step_descends(self, rng, tiny_model_config):
        """A small step lowers the loss and counts the step."""
        trainer = Trainer(SpectralMappingNet(tiny_model_config), _train_config())
        batch = trainer.make_batch([_simu_example(rng)])

        before = trainer.train_step(batch).total
        after = trainer.compute_loss(batch).total

        assert after <= before
        assert trainer.state.step == 1

    def test_non_finite_loss_is_reported(self, rng, tiny_model_config):
        """A NaN loss aborts with the batch ids and learning rate."""
        trainer = Trainer(SpectralMappingNet(tiny_model_config), _train_config())
        good = trainer.make_batch([_simu_example(rng)])
        broken = Batch(
            "simu",
            ("bad",),
            torch.full_like(good.mixtures, float("nan")),
            speech=good.speech,
            noise=good.noise,
        )

        with pytest.raises(NonFiniteLossError) as excinfo:
            trainer.train_step(broken)

        assert excinfo.value.diagnostics["ids"] == ["bad"]
        assert "learning_rate" in excinfo.value.diagnostics

    def test_fit_records_history(self, rng, tiny_model_config):
        """fit keeps one record per epoch and the best validation loss."""
        trainer = Trainer(SpectralMappingNet(tiny_model_config), _train_config())
        simu = [_simu_example(rng, f"s{i}") for i in range(2)]
        real = [_real_example(rng, f"r{i}") for i in range(2)]

        state = trainer.fit(simu, real, val=[_simu_example(rng, "v0")])

        assert state.step == 6
        assert [record.epoch for record in state.history] == [1, 2]
        assert state.best_val_loss == min(record.val_loss for record in state.history)

    def test_fit_is_deterministic(self, rng, tiny_model_config):
        """Two runs from the same seed end with identical weights."""
        simu = [_simu_example(rng, f"s{i}") for i in range(2)]
        real = [_real_example(rng, f"r{i}") for i in range(2)]

        def run():
            trainer = Trainer(SpectralMappingNet(tiny_model_config, seed=9),
                              _train_config(snr_augment=True, seed=9))
            trainer.fit(simu, real)
            return trainer.model.state_dict()

        first, second = run(), run()
        for name in first:
            torch.testing.assert_close(first[name], second[name], rtol=0, atol=0)

    def test_learning_rate_halves_on_plateau(self, rng, tiny_model_config):
        """The learning rate halves after the patience runs out."""
        trainer = Trainer(
            SpectralMappingNet(tiny_model_config), _train_config(lr_halving_patience=1)
        )
        for _ in range(2):
            trainer.scheduler.step(1.0)

        assert trainer.learning_rate == pytest.approx(5e-6)


@pytest.mark.slow
def test_overfits_a_single_utterance(rng, tiny_stft):
    """Speech is half of the mixture; the network should learn the map."""
    config = ModelConfig(
        hidden_width=64, bottleneck_width=64, num_layers=1, context_frames=0,
        predict_noise=False, sample_rate=RATE, stft=tiny_stft,
    )
    speech = rng.standard_normal((1, SAMPLES))
    example = TrainingExample("toy", "simu", 2 * speech, RATE, speech=speech, noise=speech.copy())
    trainer = Trainer(
        SpectralMappingNet(config),
        _train_config(optimizer="adam", learning_rate=3e-3, loss_flags=LOSS_ROWS["1c"]),
    )
    batch = trainer.make_batch([example], training=False)

    for _ in range(2000):
        trainer.train_step(batch)

    assert trainer.compute_loss(batch).speech_simu < 0.05
