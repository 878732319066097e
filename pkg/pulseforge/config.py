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

"""Configuration models for every pulseforge stage.

Pipeline configs are plain pydantic models validated from JSON; process-level
defaults (seed, logging, artifacts root) come from ``Settings``, which reads
``PULSEFORGE_*`` environment variables and an optional ``.env`` file.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationInfo,
    field_validator,
    model_validator,
)
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"

Domain = Literal["simu", "real"]
Split = Literal["train", "val", "test"]


def _ordered(value: tuple[float, float], name: str) -> tuple[float, float]:
    low, high = value
    if low > high:
        raise ValueError(f"{name} range must be ordered, got [{low}, {high}]")
    return value


@dataclass(frozen=True)
class FrameGeometry:
    """Sample-domain framing derived from an StftConfig at a given rate."""

    window_length: int
    hop_length: int
    n_fft: int

    @property
    def num_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def overlap(self) -> int:
        return self.window_length // self.hop_length


class StftConfig(BaseModel):
    """STFT analysis settings (square-root Hann analysis and synthesis)."""

    model_config = ConfigDict(frozen=True)

    window_ms: float = Field(default=32.0, gt=0)
    hop_ms: float = Field(default=8.0, gt=0)
    window: Literal["sqrt_hann"] = "sqrt_hann"

    @model_validator(mode="after")
    def _hop_within_window(self) -> "StftConfig":
        if self.hop_ms > self.window_ms:
            raise ValueError("hop_ms must not exceed window_ms")
        return self

    def geometry(self, sample_rate: int) -> FrameGeometry:
        """Resolve window/hop/FFT sizes in samples.

        The FFT length is the window length rounded up to the next power of two.
        """
        window = self.window_ms * sample_rate / 1000.0
        hop = self.hop_ms * sample_rate / 1000.0
        if abs(window - round(window)) > 1e-9 or abs(hop - round(hop)) > 1e-9:
            raise ConfigurationError(
                f"{self.window_ms} ms / {self.hop_ms} ms is not a whole number of "
                f"samples at {sample_rate} Hz"
            )
        window_length, hop_length = int(round(window)), int(round(hop))
        if window_length % hop_length != 0:
            raise ConfigurationError(
                f"hop of {hop_length} samples does not divide window of "
                f"{window_length} samples"
            )
        n_fft = 1 << (window_length - 1).bit_length()
        return FrameGeometry(window_length, hop_length, n_fft)


class SyncConfig(BaseModel):
    """GCC-PHAT synchronization settings; frames are 1 ms apart."""

    model_config = ConfigDict(frozen=True)

    stft: StftConfig = Field(default=StftConfig(window_ms=16.0, hop_ms=1.0))
    max_delay_frames: int = Field(default=60, ge=0)

    @field_validator("stft")
    @classmethod
    def _one_ms_hop(cls, value: StftConfig) -> StftConfig:
        if value.hop_ms != 1.0:
            raise ValueError("synchronization requires a 1 ms hop")
        return value

    @property
    def candidate_delays(self) -> range:
        return range(-self.max_delay_frames, self.max_delay_frames + 1)


class FcpTapGeometry(BaseModel):
    """Past/future tap counts of the per-frequency projection filter."""

    model_config = ConfigDict(frozen=True)

    past_taps: int = Field(default=1, ge=0)
    future_taps: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _at_least_one_tap(self) -> "FcpTapGeometry":
        if self.past_taps + self.future_taps < 1:
            raise ValueError("past_taps + future_taps must be at least 1")
        return self

    @property
    def num_taps(self) -> int:
        return self.past_taps + self.future_taps


class AlignConfig(BaseModel):
    """How a far-field estimate is aligned to its pseudo-label before the loss."""

    model_config = ConfigDict(frozen=True)

    mode: Literal["fcp", "td"] = "fcp"
    geometry: FcpTapGeometry = Field(default_factory=FcpTapGeometry)
    td_taps: int = Field(default=64, ge=0, description="K past and K future taps")
    ridge: float | None = Field(default=None, ge=0, description="absolute ridge")
    relative_ridge: float = Field(default=1e-6, ge=0)
    full_gradient: bool = False

    @classmethod
    def parse(cls, text: str, **overrides: object) -> "AlignConfig":
        """Parse ``fcp``, ``fcp:<I>,<J>`` or ``td:<K>``."""
        kind, _, arg = text.strip().lower().partition(":")
        if kind == "fcp":
            if not arg:
                return cls(mode="fcp", **overrides)
            past, _, future = arg.partition(",")
            geometry = FcpTapGeometry(
                past_taps=int(past), future_taps=int(future or 0)
            )
            return cls(mode="fcp", geometry=geometry, **overrides)
        if kind == "td":
            return cls(mode="td", td_taps=int(arg or 64), **overrides)
        raise ValueError(f"Unknown alignment mode: {text!r}")


class LossFlags(BaseModel):
    """Which loss terms are active for simulated and for real mini-batches."""

    model_config = ConfigDict(frozen=True)

    simu_speech: bool = True
    simu_noise: bool = True
    simu_mixture: bool = True
    real_speech: bool = True
    real_mixture: bool = True

    @property
    def needs_noise_head(self) -> bool:
        return self.simu_noise or self.simu_mixture or self.real_mixture

    @property
    def uses_real(self) -> bool:
        return self.real_speech or self.real_mixture

    @classmethod
    def from_row(cls, row: str) -> "LossFlags":
        try:
            return LOSS_ROWS[row.lower()]
        except KeyError:
            raise ValueError(
                f"Unknown loss row {row!r}; expected one of {sorted(LOSS_ROWS)}"
            ) from None

    @classmethod
    def parse(cls, text: str) -> "LossFlags":
        """Parse a row name (``3a``) or ``simu=X+V+Y,real=X+Y``."""
        text = text.strip()
        if "=" not in text:
            return cls.from_row(text)
        terms: dict[str, set[str]] = {"simu": set(), "real": set()}
        for chunk in text.split(","):
            domain, _, spec = chunk.partition("=")
            domain = domain.strip().lower()
            if domain not in terms:
                raise ValueError(f"Unknown loss domain {domain!r}")
            terms[domain] = {t.strip().upper() for t in spec.split("+") if t.strip()}
        return cls(
            simu_speech="X" in terms["simu"],
            simu_noise="V" in terms["simu"],
            simu_mixture="Y" in terms["simu"],
            real_speech="X" in terms["real"],
            real_mixture="Y" in terms["real"],
        )


LOSS_ROWS: dict[str, LossFlags] = {
    "1a": LossFlags(real_speech=False, real_mixture=False),
    "1b": LossFlags(simu_mixture=False, real_speech=False, real_mixture=False),
    "1c": LossFlags(
        simu_noise=False, simu_mixture=False, real_speech=False, real_mixture=False
    ),
    "3a": LossFlags(),
    "3b": LossFlags(simu_mixture=False, real_mixture=False),
    "3c": LossFlags(simu_noise=False, simu_mixture=False, real_mixture=False),
}


class ModelConfig(BaseModel):
    """Shape of the spectral-mapping enhancement network."""

    model_config = ConfigDict(frozen=True)

    input_channels: Literal[1, 2, 6] = 1
    hidden_width: int = Field(default=128, ge=1)
    bottleneck_width: int = Field(default=64, ge=1)
    num_layers: int = Field(default=2, ge=1)
    context_frames: int = Field(default=2, ge=0)
    predict_noise: bool = True
    reference_channel: int = Field(default=1, ge=1, description="1-based")
    sample_rate: int = Field(default=16000, gt=0)
    stft: StftConfig = Field(default_factory=StftConfig)

    @model_validator(mode="after")
    def _reference_in_range(self) -> "ModelConfig":
        if self.reference_channel > self.input_channels:
            raise ValueError(
                f"reference_channel {self.reference_channel} exceeds "
                f"input_channels {self.input_channels}"
            )
        return self

    @classmethod
    def for_channels(cls, channels: int, **overrides: object) -> "ModelConfig":
        """Defaults per task: 6-channel input predicts at the fifth microphone."""
        reference = 5 if channels == 6 else 1
        return cls(input_channels=channels, reference_channel=reference, **overrides)


class TrainConfig(BaseModel):
    """Optimization settings for CTSEnet and ctPuLSEnet training."""

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(default=1e-3, gt=0)
    lr_halving_patience: int = Field(default=2, ge=1)
    optimizer: Literal["sgd", "adam"] = "sgd"
    batch_size: int = Field(default=1, ge=1)
    segment_seconds: float = Field(default=8.0, gt=0)
    snr_augment: bool = True
    snr_aug_range: tuple[float, float] = (-10.0, 15.0)
    alpha: float = Field(default=5.0, gt=0)
    seed: int = 0
    max_epochs: int = Field(default=20, ge=1)
    steps_per_epoch: int | None = Field(default=None, ge=1)
    simu_ratio: float | None = Field(default=None, ge=0, le=1)
    loss_flags: LossFlags = Field(default_factory=LossFlags)
    align: AlignConfig = Field(default_factory=AlignConfig)

    @field_validator("snr_aug_range")
    @classmethod
    def _snr_ordered(cls, value: tuple[float, float]) -> tuple[float, float]:
        return _ordered(value, "snr_aug_range")


class SplitSizes(BaseModel):
    """Utterance counts per domain within one split."""

    model_config = ConfigDict(frozen=True)

    simu: int = Field(default=0, ge=0)
    real: int = Field(default=0, ge=0)


class SimCorpusConfig(BaseModel):
    """Synthetic paired close-talk / far-field corpus."""

    model_config = ConfigDict(frozen=True)

    num_utterances: dict[Split, SplitSizes] = Field(
        default_factory=lambda: {
            "train": SplitSizes(simu=200, real=100),
            "val": SplitSizes(simu=20, real=10),
            "test": SplitSizes(simu=50, real=50),
        }
    )
    channels: int = Field(default=6, ge=1)
    sample_rate: int = Field(default=16000, gt=0)
    utterance_seconds: tuple[float, float] = (2.0, 3.0)
    close_talk_snr_db: tuple[float, float] = (15.0, 25.0)
    far_field_snr_db: tuple[float, float] = (-5.0, 5.0)
    offset_ms: tuple[float, float] = (-50.0, 50.0)
    propagation_delay_ms: tuple[float, float] = (0.0, 2.0)
    propagation_gain: tuple[float, float] = (0.5, 1.0)
    seed: int = 0

    @field_validator(
        "utterance_seconds",
        "close_talk_snr_db",
        "far_field_snr_db",
        "offset_ms",
        "propagation_delay_ms",
        "propagation_gain",
    )
    @classmethod
    def _ranges_ordered(
        cls, value: tuple[float, float], info: ValidationInfo
    ) -> tuple[float, float]:
        return _ordered(value, info.field_name or "range")

    @field_validator("propagation_delay_ms")
    @classmethod
    def _short_propagation(cls, value: tuple[float, float]) -> tuple[float, float]:
        if value[0] < 0 or value[1] > 2.0:
            raise ValueError("propagation delays must lie within [0, 2] ms")
        return value


class PipelineConfig(BaseModel):
    """Everything ``run-all`` needs, versioned for JSON config files."""

    schema_version: Literal["1"] = SCHEMA_VERSION
    seed: int = 0
    corpus: SimCorpusConfig = Field(default_factory=SimCorpusConfig)
    sync: SyncConfig = Field(default_factory=SyncConfig)
    ctse_model: ModelConfig = Field(
        default_factory=lambda: ModelConfig(predict_noise=False)
    )
    ctse_train: TrainConfig = Field(
        default_factory=lambda: TrainConfig(
            loss_flags=LOSS_ROWS["1c"],
            optimizer="adam",
            segment_seconds=2.0,
            max_epochs=8,
        )
    )
    ctpulse_model: ModelConfig = Field(default_factory=ModelConfig)
    ctpulse_train: TrainConfig = Field(
        default_factory=lambda: TrainConfig(
            loss_flags=LOSS_ROWS["3a"],
            optimizer="adam",
            segment_seconds=2.0,
            max_epochs=8,
        )
    )
    run_baseline: bool = True
    gamma_db: float | None = 10.0
    sdr_filter_taps: int = Field(default=256, ge=0)

    @model_validator(mode="after")
    def _consistent_stages(self) -> "PipelineConfig":
        rate = self.corpus.sample_rate
        for name in ("ctse_model", "ctpulse_model"):
            model = getattr(self, name)
            if model.sample_rate != rate:
                raise ValueError(
                    f"{name}.sample_rate {model.sample_rate} differs from corpus "
                    f"sample_rate {rate}"
                )
        if self.ctse_model.input_channels != 1:
            raise ValueError("the close-talk model takes a single channel")
        if self.ctpulse_model.input_channels not in (1, self.corpus.channels) and not (
            self.ctpulse_model.input_channels == 2 and self.corpus.channels == 6
        ):
            raise ValueError(
                f"a {self.ctpulse_model.input_channels}-channel model cannot be fed "
                f"from a {self.corpus.channels}-channel corpus"
            )
        return self

    @classmethod
    def from_json_file(cls, path: str | Path) -> "PipelineConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Propagate one seed into every stage that draws random numbers."""
        return self.model_copy(
            update={
                "seed": seed,
                "corpus": self.corpus.model_copy(update={"seed": seed}),
                "ctse_train": self.ctse_train.model_copy(update={"seed": seed}),
                "ctpulse_train": self.ctpulse_train.model_copy(update={"seed": seed}),
            }
        )


def config_hash(config: BaseModel) -> str:
    """sha256 of the canonical (sorted-key) JSON form of a config."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Settings(BaseSettings):
    """Process-level settings for pulseforge runs."""

    model_config = SettingsConfigDict(
        env_file=os.path.join(os.getcwd(), ".env"),
        env_prefix="PULSEFORGE_",
        extra="ignore",
    )

    seed: int = Field(default=0)
    log_level: str = Field(default="INFO")
    json_logs: bool = Field(default=False)
    artifacts_root: Path = Field(default=Path("./artifacts"))
    torch_threads: int = Field(default=1, ge=1)
