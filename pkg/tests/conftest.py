"""Shared fixtures for pulseforge tests."""

import numpy as np
import pytest

from pulseforge.config import (
    LOSS_ROWS,
    ModelConfig,
    PipelineConfig,
    SimCorpusConfig,
    SplitSizes,
    StftConfig,
    TrainConfig,
)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_stft() -> StftConfig:
    """16 ms / 4 ms at 1 kHz: 16-sample window, 9 bins."""
    return StftConfig(window_ms=16.0, hop_ms=4.0)


@pytest.fixture
def tiny_model_config(tiny_stft: StftConfig) -> ModelConfig:
    """A model small enough for exhaustive finite differences."""
    return ModelConfig(
        input_channels=1,
        hidden_width=6,
        bottleneck_width=4,
        num_layers=1,
        context_frames=1,
        predict_noise=True,
        sample_rate=1000,
        stft=tiny_stft,
    )


@pytest.fixture
def small_corpus_config() -> SimCorpusConfig:
    """A few short 8 kHz utterances per split."""
    return SimCorpusConfig(
        num_utterances={
            "train": SplitSizes(simu=2, real=2),
            "val": SplitSizes(simu=1, real=1),
            "test": SplitSizes(simu=1, real=1),
        },
        sample_rate=8000,
        utterance_seconds=(0.5, 0.6),
        seed=3,
    )


@pytest.fixture
def tiny_pipeline_config(small_corpus_config: SimCorpusConfig) -> PipelineConfig:
    """End-to-end settings that train for a couple of steps only."""
    train = dict(
        optimizer="adam", segment_seconds=0.25, max_epochs=1, steps_per_epoch=2
    )
    return PipelineConfig(
        corpus=small_corpus_config,
        ctse_model=ModelConfig(
            hidden_width=16, bottleneck_width=8, num_layers=1, context_frames=1,
            predict_noise=False, sample_rate=8000,
        ),
        ctse_train=TrainConfig(loss_flags=LOSS_ROWS["1c"], **train),
        ctpulse_model=ModelConfig(
            hidden_width=16, bottleneck_width=8, num_layers=1, context_frames=1,
            sample_rate=8000,
        ),
        ctpulse_train=TrainConfig(loss_flags=LOSS_ROWS["3a"], **train),
        sdr_filter_taps=16,
    ).with_seed(3)
