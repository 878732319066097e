# Copyright 2025 Medbrook Systems
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Unit tests for pulseforge configuration."""

import pytest
from pydantic import ValidationError

from pulseforge.config import (
    LOSS_ROWS,
    AlignConfig,
    FcpTapGeometry,
    LossFlags,
    ModelConfig,
    PipelineConfig,
    Settings,
    StftConfig,
    SyncConfig,
    TrainConfig,
    config_hash,
)
from pulseforge.errors import ConfigurationError


def test_stft_defaults():
    """Default analysis is 32 ms / 8 ms with a 512-point FFT at 16 kHz."""
    geometry = StftConfig().geometry(16000)

    assert geometry.window_length == 512
    assert geometry.hop_length == 128
    assert geometry.n_fft == 512
    assert geometry.num_bins == 257
    assert geometry.overlap == 4


def test_fft_length_rounds_up_to_power_of_two():
    """A 320-sample window gets a 512-point FFT."""
    geometry = StftConfig(window_ms=20.0, hop_ms=10.0).geometry(16000)

    assert geometry.window_length == 320
    assert geometry.n_fft == 512


def test_hop_must_divide_window():
    """A hop that does not divide the window is rejected."""
    with pytest.raises(ConfigurationError):
        StftConfig(window_ms=32.0, hop_ms=12.0).geometry(16000)


def test_fractional_samples_rejected():
    """Durations that are not whole samples at the rate are rejected."""
    with pytest.raises(ConfigurationError):
        StftConfig(window_ms=32.0, hop_ms=8.0).geometry(11025)


def test_hop_longer_than_window_rejected():
    """The hop may not exceed the window."""
    with pytest.raises(ValidationError):
        StftConfig(window_ms=8.0, hop_ms=16.0)


def test_sync_defaults():
    """Sync analyses at a 1 ms hop and searches +/-60 frames."""
    config = SyncConfig()

    assert config.stft.geometry(16000).hop_length == 16
    assert list(config.candidate_delays)[0] == -60
    assert list(config.candidate_delays)[-1] == 60


def test_sync_requires_one_ms_hop():
    """Sync configs with another hop are rejected."""
    with pytest.raises(ValidationError):
        SyncConfig(stft=StftConfig(window_ms=16.0, hop_ms=2.0))


def test_fcp_needs_a_tap():
    """An FCP filter needs at least one tap."""
    with pytest.raises(ValidationError):
        FcpTapGeometry(past_taps=0, future_taps=0)


class TestAlignParse:
    def test_plain_fcp(self):
        """Bare "fcp" means a single-tap projection."""
        config = AlignConfig.parse("fcp")
        assert config.mode == "fcp"
        assert config.geometry.num_taps == 1

    def test_fcp_with_taps(self):
        """"fcp:I,J" sets past and future taps."""
        config = AlignConfig.parse("fcp:2,1")
        assert config.geometry.past_taps == 2
        assert config.geometry.future_taps == 1

    def test_td(self):
        """"td:K" selects the time-domain filter and keeps overrides."""
        config = AlignConfig.parse("td:16", full_gradient=True)
        assert config.mode == "td"
        assert config.td_taps == 16
        assert config.full_gradient

    def test_unknown_mode(self):
        """Unknown alignment modes are rejected."""
        with pytest.raises(ValueError):
            AlignConfig.parse("wiener")


class TestLossFlags:
    def test_rows(self):
        """The named rows enable the expected loss terms."""
        assert LOSS_ROWS["1a"].simu_mixture and not LOSS_ROWS["1a"].uses_real
        assert not LOSS_ROWS["1c"].needs_noise_head
        assert LOSS_ROWS["3c"].real_speech and not LOSS_ROWS["3c"].real_mixture
        assert LOSS_ROWS["3a"] == LossFlags()

    def test_parse_row_name(self):
        """Row names parse case-insensitively."""
        assert LossFlags.parse("3B") == LOSS_ROWS["3b"]

    def test_parse_terms(self):
        """Explicit term lists parse per domain."""
        flags = LossFlags.parse("simu=X+V, real=X")
        assert flags == LossFlags(simu_mixture=False, real_mixture=False)

    def test_unknown_row(self):
        """Unknown row names are rejected."""
        with pytest.raises(ValueError):
            LossFlags.parse("9z")


def test_model_for_six_channels_predicts_at_fifth_mic():
    """Six-channel models predict at the fifth microphone."""
    config = ModelConfig.for_channels(6)

    assert config.input_channels == 6
    assert config.reference_channel == 5


def test_model_reference_out_of_range():
    """The reference channel must be one of the inputs."""
    with pytest.raises(ValidationError):
        ModelConfig(input_channels=2, reference_channel=3)


def test_train_defaults():
    """Training defaults match the documented schedule."""
    config = TrainConfig()

    assert config.learning_rate == 1e-3
    assert config.lr_halving_patience == 2
    assert config.batch_size == 1
    assert config.segment_seconds == 8.0
    assert config.snr_aug_range == (-10.0, 15.0)
    assert config.alpha == 5.0


def test_pipeline_round_trip(tmp_path):
    """A pipeline config survives a JSON file round trip."""
    config = PipelineConfig().with_seed(11)
    path = tmp_path / "config.json"
    path.write_text(config.model_dump_json(), encoding="utf-8")

    loaded = PipelineConfig.from_json_file(path)

    assert loaded == config
    assert config_hash(loaded) == config_hash(config)


def test_with_seed_reaches_every_stage():
    """with_seed reseeds every stochastic stage."""
    config = PipelineConfig().with_seed(5)

    assert config.seed == 5
    assert config.corpus.seed == 5
    assert config.ctse_train.seed == 5
    assert config.ctpulse_train.seed == 5


def test_config_hash_changes_with_content():
    """Different configs hash differently."""
    assert config_hash(PipelineConfig()) != config_hash(PipelineConfig(seed=1))


def test_pipeline_rejects_unknown_schema():
    """Config files with another schema version are rejected."""
    with pytest.raises(ValidationError):
        PipelineConfig.model_validate({"schema_version": "2"})


def test_pipeline_rejects_rate_mismatch():
    """All stages must share one sample rate."""
    with pytest.raises(ValidationError):
        PipelineConfig(ctpulse_model=ModelConfig(sample_rate=8000))


def test_pipeline_rejects_multichannel_close_talk_model():
    """The close-talk model must be single-channel."""
    with pytest.raises(ValidationError):
        PipelineConfig(ctse_model=ModelConfig.for_channels(2))


def test_settings_from_environment(monkeypatch):
    """Process settings come from PULSEFORGE_* variables."""
    monkeypatch.setenv("PULSEFORGE_SEED", "7")
    monkeypatch.setenv("PULSEFORGE_LOG_LEVEL", "DEBUG")

    settings = Settings()

    assert settings.seed == 7
    assert settings.log_level == "DEBUG"
    assert settings.json_logs is False
