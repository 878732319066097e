"""
Mini-batch construction and the co-learning training loop.

A ``Trainer`` owns the model, optimizer, learning-rate schedule and the named
random streams for channel selection, cropping, SNR augmentation and domain
scheduling. ``train_step`` performs one update on the alpha-weighted loss of a
simulated or real mini-batch.
"""

import copy
import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from pydantic import BaseModel, Field

from ..config import Domain, ModelConfig, TrainConfig
from ..dsp.stft import stft_tensor
from ..dsp.types import SignalGeometry
from ..errors import ConfigurationError, NonFiniteLossError, ShapeMismatchError
from ..losses.spectral import (
    LossBreakdown,
    LossParts,
    combined_loss,
    loss_mixture_constraint,
    loss_noise_simu,
    loss_speech_real,
    loss_speech_simu,
)
from ..seeding import named_rng
from .augment import draw_snr_shift, noise_gain_for_shift
from .network import SpectralMappingNet
from .schedule import co_learning_schedule

logger = logging.getLogger(__name__)

# Zero-based indices of the front-facing microphones of the six-channel array.
FRONT_FIVE = (0, 2, 3, 4, 5)
# Fixed microphone pair for evaluating two-channel models: reference first.
EVAL_PAIR = (4, 0)


@dataclass(frozen=True)
class TrainingExample:
    """One utterance in memory.

    Attributes:
        mixtures: ``(P, N)`` far-field (or close-talk, P = 1) mixtures.
        speech: ``(P, N)`` clean speech images; simulated data only.
        noise: ``(P, N)`` noise images; simulated data only.
        pseudo: ``(N,)`` pseudo-label; real data only.
    """

    id: str
    domain: Domain
    mixtures: np.ndarray
    sample_rate: int
    speech: np.ndarray | None = None
    noise: np.ndarray | None = None
    pseudo: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.mixtures.ndim != 2:
            raise ShapeMismatchError(f"{self.id}: mixtures must be (channels, samples)")
        if self.domain == "simu" and (self.speech is None or self.noise is None):
            raise ConfigurationError(f"{self.id}: simulated examples need speech and noise")
        if self.domain == "real" and self.pseudo is None:
            raise ConfigurationError(f"{self.id}: real examples need a pseudo-label")

    @property
    def num_channels(self) -> int:
        return int(self.mixtures.shape[0])

    @property
    def num_samples(self) -> int:
        return int(self.mixtures.shape[1])


@dataclass(frozen=True)
class Batch:
    """Tensors of one mini-batch; targets are at the reference microphone."""

    domain: Domain
    ids: tuple[str, ...]
    mixtures: torch.Tensor
    speech: torch.Tensor | None = None
    noise: torch.Tensor | None = None
    pseudo: torch.Tensor | None = None


class EpochRecord(BaseModel):
    epoch: int
    learning_rate: float
    train_loss: float
    val_loss: float | None = None
    components: dict[str, float] = Field(default_factory=dict)


class TrainingState(BaseModel):
    """Counters persisted in the checkpoint sidecar."""

    epoch: int = 0
    step: int = 0
    learning_rate: float = 0.0
    best_val_loss: float | None = None
    history: list[EpochRecord] = Field(default_factory=list)


def select_channels(
    config: ModelConfig, num_available: int, rng: np.random.Generator
) -> list[int]:
    """Training-time microphone choice; the reference is ``config.reference_channel``."""
    wanted = config.input_channels
    if wanted == 1:
        return [int(rng.integers(num_available))]
    if wanted == num_available:
        return list(range(num_available))
    if wanted == 2 and num_available == 6:
        return [int(c) for c in rng.choice(FRONT_FIVE, size=2, replace=False)]
    raise ShapeMismatchError(
        f"cannot feed a {wanted}-channel model from {num_available} microphones"
    )


def evaluation_channel_sets(config: ModelConfig, num_available: int) -> list[list[int]]:
    """Deterministic inputs for scoring: every channel alone for 1-ch models."""
    wanted = config.input_channels
    if wanted == 1:
        return [[c] for c in range(num_available)]
    if wanted == num_available:
        return [list(range(num_available))]
    if wanted == 2 and num_available == 6:
        return [list(EVAL_PAIR)]
    raise ShapeMismatchError(
        f"cannot feed a {wanted}-channel model from {num_available} microphones"
    )


def crop_bounds(num_samples: int, segment: int, rng: np.random.Generator | None) -> int:
    """Random segment start, or 0 when the utterance is not longer than the segment."""
    if num_samples <= segment or rng is None:
        return 0
    return int(rng.integers(0, num_samples - segment + 1))


def _fit(signal: np.ndarray, start: int, segment: int) -> np.ndarray:
    piece = signal[..., start : start + segment]
    missing = segment - piece.shape[-1]
    if missing > 0:
        pad = [(0, 0)] * (piece.ndim - 1) + [(0, missing)]
        piece = np.pad(piece, pad)
    return piece


def compute_gradients(model: torch.nn.Module, objective: torch.Tensor) -> dict[str, torch.Tensor]:
    """Reverse-mode gradients of a scalar objective for every named parameter."""
    if not bool(torch.isfinite(objective)):
        raise NonFiniteLossError(f"objective is {float(objective)}")
    names, params = zip(*model.named_parameters())
    if not objective.requires_grad:
        return {name: torch.zeros_like(p) for name, p in zip(names, params)}
    grads = torch.autograd.grad(objective, params, allow_unused=True)
    return {
        name: torch.zeros_like(p) if g is None else g
        for name, p, g in zip(names, params, grads)
    }


class Trainer:
    """Optimizes a SpectralMappingNet on simulated and pseudo-labelled real data."""

    def __init__(self, model: SpectralMappingNet, config: TrainConfig) -> None:
        if config.loss_flags.needs_noise_head and model.noise_head is None:
            raise ConfigurationError(
                "loss flags need a noise estimate but the model has no noise head"
            )
        self.model = model
        self.config = config
        self.model_config = model.config
        self.segment_samples = int(round(config.segment_seconds * model.config.sample_rate))

        if config.optimizer == "adam":
            self.optimizer: torch.optim.Optimizer = torch.optim.Adam(
                model.parameters(), lr=config.learning_rate
            )
        else:
            self.optimizer = torch.optim.SGD(model.parameters(), lr=config.learning_rate)
        self.scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
            self.optimizer,
            mode="min",
            factor=0.5,
            patience=config.lr_halving_patience - 1,
            threshold=0.0,
        )

        self.channel_rng = named_rng(config.seed, "channels")
        self.crop_rng = named_rng(config.seed, "crop")
        self.augment_rng = named_rng(config.seed, "augment")
        self.schedule_rng = named_rng(config.seed, "schedule")
        self.state = TrainingState(learning_rate=config.learning_rate)

    @property
    def learning_rate(self) -> float:
        return float(self.optimizer.param_groups[0]["lr"])

    def make_batch(self, examples: list[TrainingExample], training: bool = True) -> Batch:
        """Select channels, crop and (for simulated data) SNR-augment a mini-batch."""
        domains = {e.domain for e in examples}
        if len(domains) != 1:
            raise ShapeMismatchError("a mini-batch must come from a single domain")
        domain: Domain = domains.pop()
        segment = self.segment_samples
        reference = self.model_config.reference_channel - 1

        mixtures, speech, noise, pseudo = [], [], [], []
        for example in examples:
            channels = select_channels(
                self.model_config, example.num_channels, self.channel_rng
            )
            start = crop_bounds(
                example.num_samples, segment, self.crop_rng if training else None
            )
            if domain == "simu":
                assert example.speech is not None and example.noise is not None
                gain = 1.0
                if training and self.config.snr_augment:
                    shift = draw_snr_shift(self.augment_rng, self.config.snr_aug_range)
                    gain = noise_gain_for_shift(shift)
                clean = _fit(example.speech[channels], start, segment)
                interference = gain * _fit(example.noise[channels], start, segment)
                mixtures.append(clean + interference)
                speech.append(clean[reference])
                noise.append(interference[reference])
            else:
                assert example.pseudo is not None
                mixtures.append(_fit(example.mixtures[channels], start, segment))
                pseudo.append(_fit(example.pseudo, start, segment))

        def stacked(arrays: list[np.ndarray]) -> torch.Tensor | None:
            return torch.from_numpy(np.stack(arrays)) if arrays else None

        return Batch(
            domain=domain,
            ids=tuple(e.id for e in examples),
            mixtures=torch.from_numpy(np.stack(mixtures)),
            speech=stacked(speech),
            noise=stacked(noise),
            pseudo=stacked(pseudo),
        )

    def compute_loss(self, batch: Batch) -> LossBreakdown:
        stft_config = self.model_config.stft
        rate = self.model_config.sample_rate
        flags = self.config.loss_flags

        spectra = stft_tensor(batch.mixtures, stft_config, rate)
        est_speech, est_noise = self.model(spectra)
        reference = spectra[:, self.model_config.reference_channel - 1]

        if batch.domain == "simu":
            assert batch.speech is not None and batch.noise is not None
            parts = LossParts(
                speech_simu=loss_speech_simu(
                    est_speech, stft_tensor(batch.speech, stft_config, rate)
                )
                if flags.simu_speech
                else None,
                noise_simu=loss_noise_simu(
                    est_noise, stft_tensor(batch.noise, stft_config, rate)
                )
                if flags.simu_noise and est_noise is not None
                else None,
                mixture_constraint=loss_mixture_constraint(est_speech, est_noise, reference)
                if flags.simu_mixture and est_noise is not None
                else None,
            )
        else:
            assert batch.pseudo is not None
            geometry = SignalGeometry(stft_config, rate, batch.pseudo.shape[-1])
            parts = LossParts(
                speech_real=loss_speech_real(
                    est_speech,
                    stft_tensor(batch.pseudo, stft_config, rate),
                    self.config.align,
                    geometry,
                )
                if flags.real_speech
                else None,
                mixture_constraint=loss_mixture_constraint(est_speech, est_noise, reference)
                if flags.real_mixture and est_noise is not None
                else None,
            )
        return combined_loss(parts, batch.domain, flags, self.config.alpha)

    def train_step(self, batch: Batch) -> LossBreakdown:
        """One optimizer update on the weighted loss of ``batch``."""
        self.model.train()
        self.optimizer.zero_grad()
        breakdown = self.compute_loss(batch)
        if not math.isfinite(breakdown.total):
            diagnostics = {
                "epoch": self.state.epoch,
                "step": self.state.step,
                "ids": list(batch.ids),
                "learning_rate": self.learning_rate,
                "loss": breakdown.as_dict(),
            }
            logger.error(f"Non-finite loss at step {self.state.step}: {diagnostics}")
            raise NonFiniteLossError(
                f"non-finite {batch.domain} loss at step {self.state.step}", diagnostics
            )
        assert breakdown.objective is not None
        breakdown.objective.backward()
        self.optimizer.step()
        self.state.step += 1
        logger.debug(f"step {self.state.step} {batch.domain}: {breakdown.total:.5f}")
        return breakdown

    def validate(self, examples: list[TrainingExample]) -> float:
        """Mean total loss over fixed channel sets and the leading segment."""
        if not examples:
            return float("nan")
        self.model.eval()
        totals = []
        with torch.no_grad():
            for example in examples:
                for channels in evaluation_channel_sets(self.model_config, example.num_channels):
                    fixed = _with_channels(example, channels)
                    totals.append(self.compute_loss(self._fixed_batch(fixed)).total)
        return float(np.mean(totals))

    def _fixed_batch(self, example: TrainingExample) -> Batch:
        segment = self.segment_samples
        if example.domain == "simu":
            assert example.speech is not None and example.noise is not None
            speech = _fit(example.speech, 0, segment)
            noise = _fit(example.noise, 0, segment)
            reference = self.model_config.reference_channel - 1
            return Batch(
                "simu",
                (example.id,),
                torch.from_numpy((speech + noise)[None]),
                speech=torch.from_numpy(speech[reference][None]),
                noise=torch.from_numpy(noise[reference][None]),
            )
        assert example.pseudo is not None
        return Batch(
            "real",
            (example.id,),
            torch.from_numpy(_fit(example.mixtures, 0, segment)[None]),
            pseudo=torch.from_numpy(_fit(example.pseudo, 0, segment)[None]),
        )

    def fit(
        self,
        simu: list[TrainingExample],
        real: list[TrainingExample],
        val: list[TrainingExample] | None = None,
    ) -> TrainingState:
        """Train for ``max_epochs``; keep the parameters with the best validation loss."""
        config = self.config
        steps = config.steps_per_epoch or max(
            1, math.ceil((len(simu) + len(real)) / config.batch_size)
        )
        schedule = co_learning_schedule(
            simu, real, self.schedule_rng, config.simu_ratio, config.batch_size
        )
        logger.info(
            f"Training {len(simu)} simu + {len(real)} real utterances, "
            f"{steps} steps/epoch, {config.max_epochs} epochs, {config.optimizer}"
        )
        best_params = None
        for epoch in range(1, config.max_epochs + 1):
            self.state.epoch = epoch
            sums: dict[str, list[float]] = {}
            totals = []
            for _ in range(steps):
                examples, _domain = next(schedule)
                breakdown = self.train_step(self.make_batch(examples))
                totals.append(breakdown.total)
                for key, value in breakdown.as_dict().items():
                    if key not in ("domain", "alpha", "total"):
                        sums.setdefault(f"{breakdown.domain}/{key}", []).append(float(value))

            train_loss = float(np.mean(totals))
            val_loss = self.validate(val) if val else None
            monitored = val_loss if val_loss is not None else train_loss
            if self.state.best_val_loss is None or monitored < self.state.best_val_loss:
                self.state.best_val_loss = monitored
                best_params = copy.deepcopy(self.model.state_dict())
            record = EpochRecord(
                epoch=epoch,
                learning_rate=self.learning_rate,
                train_loss=train_loss,
                val_loss=val_loss,
                components={
                    key: float(np.mean(values))
                    for key, values in sorted(sums.items())
                    if any(values)
                },
            )
            self.state.history.append(record)
            logger.info(
                f"epoch {epoch}: lr={record.learning_rate:.2e} train={train_loss:.4f} "
                f"val={val_loss if val_loss is None else round(val_loss, 4)} "
                f"{record.components}"
            )
            self.scheduler.step(monitored)
            self.state.learning_rate = self.learning_rate

        if best_params is not None:
            self.model.load_state_dict(best_params)
        return self.state


def _with_channels(example: TrainingExample, channels: list[int]) -> TrainingExample:
    return TrainingExample(
        id=example.id,
        domain=example.domain,
        mixtures=example.mixtures[channels],
        sample_rate=example.sample_rate,
        speech=example.speech[channels] if example.speech is not None else None,
        noise=example.noise[channels] if example.noise is not None else None,
        pseudo=example.pseudo,
    )
