"""
Small complex spectral-mapping network.

Each output frame is predicted from the real/imaginary parts of every input
channel over a +/-C frame context. Features pass through a linear bottleneck,
``num_layers`` tanh layers and linear heads giving the RI components of the
speech (and optionally noise) spectrogram at the reference microphone. Inputs
are divided by the reference channel's RMS magnitude and outputs multiplied
back, so the mapping is scale-equivariant.
"""

import logging
import math

import numpy as np
import torch
from torch import nn

from ..config import ModelConfig
from ..dsp.types import Spectrogram
from ..errors import ShapeMismatchError
from ..seeding import torch_generator

logger = logging.getLogger(__name__)

_SCALE_FLOOR = 1e-8


class SpectralMappingNet(nn.Module):
    """Per-frame MLP over stacked RI features with speech and noise heads."""

    def __init__(self, config: ModelConfig, seed: int = 0) -> None:
        super().__init__()
        self.config = config
        self.num_bins = config.stft.geometry(config.sample_rate).num_bins
        features = (
            config.input_channels * self.num_bins * 2 * (2 * config.context_frames + 1)
        )
        self.bottleneck = nn.Linear(features, config.bottleneck_width)
        widths = [config.bottleneck_width] + [config.hidden_width] * config.num_layers
        self.hidden = nn.ModuleList(
            nn.Linear(widths[i], widths[i + 1]) for i in range(config.num_layers)
        )
        self.speech_head = nn.Linear(config.hidden_width, 2 * self.num_bins)
        self.noise_head = (
            nn.Linear(config.hidden_width, 2 * self.num_bins)
            if config.predict_noise
            else None
        )
        self.double()
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int) -> None:
        """Uniform(+/- 1/sqrt(fan_in)) init from the ``model-init`` stream of ``seed``."""
        generator = torch_generator(seed, "model-init")
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, nn.Linear):
                    bound = 1.0 / math.sqrt(module.in_features)
                    for param in (module.weight, module.bias):
                        draw = torch.rand(param.shape, generator=generator, dtype=torch.float64)
                        param.copy_((2.0 * draw - 1.0) * bound)

    def _features(self, mixtures: torch.Tensor) -> torch.Tensor:
        context = self.config.context_frames
        batch, channels, frames, bins = mixtures.shape
        ri = torch.view_as_real(mixtures)  # (B, C, T, F, 2)
        ri = ri.permute(0, 2, 1, 3, 4).reshape(batch, frames, channels * bins * 2)
        if context == 0:
            return ri
        padded = nn.functional.pad(ri, (0, 0, context, context))
        windows = padded.unfold(1, 2 * context + 1, 1)  # (B, T, D, 2C+1)
        return windows.reshape(batch, frames, -1)

    def forward(
        self, mixtures: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        """Map ``(B, C, T, F)`` or ``(C, T, F)`` complex input to speech/noise estimates.

        Returns:
            Speech estimate and noise estimate (None without a noise head), each
            ``(B, T, F)`` (or ``(T, F)`` for unbatched input).
        """
        unbatched = mixtures.dim() == 3
        if unbatched:
            mixtures = mixtures.unsqueeze(0)
        if mixtures.dim() != 4 or mixtures.shape[1] != self.config.input_channels:
            raise ShapeMismatchError(
                f"expected {self.config.input_channels} input channels, got input of "
                f"shape {tuple(mixtures.shape)}"
            )
        if mixtures.shape[-1] != self.num_bins:
            raise ShapeMismatchError(
                f"expected {self.num_bins} frequency bins, got {mixtures.shape[-1]}"
            )

        reference = mixtures[:, self.config.reference_channel - 1]
        scale = reference.abs().pow(2).mean(dim=(-2, -1)).sqrt().clamp_min(_SCALE_FLOOR)
        scale = scale[:, None, None]

        hidden = self.bottleneck(self._features(mixtures / scale[:, None]))
        for layer in self.hidden:
            hidden = torch.tanh(layer(hidden))

        speech = self._to_complex(self.speech_head(hidden)) * scale
        noise = (
            self._to_complex(self.noise_head(hidden)) * scale
            if self.noise_head is not None
            else None
        )
        if unbatched:
            speech = speech[0]
            noise = noise[0] if noise is not None else None
        return speech, noise

    def _to_complex(self, output: torch.Tensor) -> torch.Tensor:
        batch, frames, _ = output.shape
        pairs = output.reshape(batch, frames, self.num_bins, 2).contiguous()
        return torch.view_as_complex(pairs)

    @property
    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def enhance(
    model: SpectralMappingNet, mixtures: list[Spectrogram]
) -> tuple[Spectrogram, Spectrogram | None]:
    """Run the model on one utterance given one spectrogram per input channel."""
    if len(mixtures) != model.config.input_channels:
        raise ShapeMismatchError(
            f"model expects {model.config.input_channels} channels, got {len(mixtures)}"
        )
    shapes = {m.shape for m in mixtures}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"channel spectrograms differ in shape: {sorted(shapes)}")

    stacked = torch.from_numpy(np.stack([m.data for m in mixtures]))
    model.eval()
    with torch.no_grad():
        speech, noise = model(stacked)
    reference = mixtures[model.config.reference_channel - 1]
    return (
        reference.with_data(speech.numpy()),
        reference.with_data(noise.numpy()) if noise is not None else None,
    )
