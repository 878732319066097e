"""
Training losses on complex spectrograms.

Every loss takes torch tensors shaped ``(..., T, F)`` (complex) or Spectrogram
objects and returns a 0-dim float64 tensor. Leading batch axes are reduced by
averaging per-utterance losses. All losses share one form, the RI + magnitude
distance summed over time-frequency and normalized by the reference magnitude.
"""

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import torch

from ..align.fcp import apply_fcp_tensor, fcp_taps_tensor
from ..align.wiener import apply_td_filter_tensor, wiener_taps_tensor
from ..config import AlignConfig, Domain, LossFlags
from ..dsp.stft import istft_tensor, stft_tensor
from ..dsp.types import SignalGeometry, Spectrogram
from ..errors import ShapeMismatchError, SignalError

logger = logging.getLogger(__name__)

SpecLike = Union[torch.Tensor, Spectrogram, np.ndarray, complex]


def _tensor(value: SpecLike) -> torch.Tensor:
    if isinstance(value, torch.Tensor):
        return value
    if isinstance(value, Spectrogram):
        return torch.from_numpy(value.data)
    return torch.as_tensor(np.asarray(value, dtype=np.complex128))


def ri_mag_distance(a: SpecLike, b: SpecLike) -> torch.Tensor:
    """Elementwise ``|Re a - Re b| + |Im a - Im b| + ||a| - |b||``."""
    a, b = _tensor(a), _tensor(b)
    diff = a - b
    return diff.real.abs() + diff.imag.abs() + (a.abs() - b.abs()).abs()


def normalized_distance(est: SpecLike, ref: SpecLike) -> torch.Tensor:
    """Sum of ``ri_mag_distance`` over (T, F) divided by the sum of ``|ref|``."""
    est, ref = _tensor(est), _tensor(ref)
    if est.shape != ref.shape:
        raise ShapeMismatchError(
            f"estimate {tuple(est.shape)} and reference {tuple(ref.shape)} differ"
        )
    numerator = ri_mag_distance(est, ref).sum(dim=(-2, -1))
    denominator = ref.abs().sum(dim=(-2, -1))
    if bool((denominator <= 0).any()):
        raise SignalError("degenerate reference: all-zero spectrogram")
    return (numerator / denominator).mean()


def loss_speech_simu(est: SpecLike, ref: SpecLike) -> torch.Tensor:
    return normalized_distance(est, ref)


def loss_noise_simu(est_noise: SpecLike, ref_noise: SpecLike) -> torch.Tensor:
    return normalized_distance(est_noise, ref_noise)


def loss_mixture_constraint(
    est_speech: SpecLike, est_noise: SpecLike, mixture: SpecLike
) -> torch.Tensor:
    """Penalty for speech and noise estimates not summing to the mixture."""
    return normalized_distance(_tensor(est_speech) + _tensor(est_noise), mixture)


def align_to_pseudo_label(
    est: torch.Tensor,
    pseudo: torch.Tensor,
    align: AlignConfig,
    geometry: SignalGeometry | None = None,
) -> torch.Tensor:
    """Filter ``est`` toward ``pseudo`` and return the filtered spectrogram.

    Unless ``align.full_gradient`` is set, the filter is solved from a detached
    copy of the estimate, so gradients flow only through applying it.
    """
    source = est if align.full_gradient else est.detach()
    pseudo = pseudo.detach()
    if align.mode == "fcp":
        taps = fcp_taps_tensor(
            source, pseudo, align.geometry, align.ridge, align.relative_ridge
        )
        return apply_fcp_tensor(est, taps, align.geometry)

    if geometry is None:
        raise ShapeMismatchError("time-domain alignment needs the signal geometry")
    config, rate, length = geometry.config, geometry.sample_rate, geometry.length
    est_wave = istft_tensor(est, config, rate, length)
    source_wave = est_wave if align.full_gradient else est_wave.detach()
    pseudo_wave = istft_tensor(pseudo, config, rate, length)

    batch_shape = est_wave.shape[:-1]
    flat_source = source_wave.reshape(-1, length)
    flat_pseudo = pseudo_wave.reshape(-1, length)
    flat_est = est_wave.reshape(-1, length)
    filtered = []
    for index in range(flat_est.shape[0]):
        taps = wiener_taps_tensor(
            flat_source[index],
            flat_pseudo[index],
            align.td_taps,
            align.ridge,
            align.relative_ridge,
        )
        filtered.append(apply_td_filter_tensor(flat_est[index], taps))
    filtered_wave = torch.stack(filtered).reshape(*batch_shape, length)
    return stft_tensor(filtered_wave, config, rate)


def loss_speech_real(
    est: SpecLike,
    pseudo: SpecLike,
    align: AlignConfig,
    geometry: SignalGeometry | None = None,
) -> torch.Tensor:
    """Pseudo-label loss after aligning the estimate with FCP or a Wiener filter."""
    if geometry is None and isinstance(pseudo, Spectrogram):
        geometry = pseudo.geometry
    est_t, pseudo_t = _tensor(est), _tensor(pseudo)
    if est_t.shape != pseudo_t.shape:
        raise ShapeMismatchError(
            f"estimate {tuple(est_t.shape)} and pseudo-label {tuple(pseudo_t.shape)} differ"
        )
    if bool((pseudo_t.abs().sum(dim=(-2, -1)) <= 0).any()):
        raise SignalError("degenerate reference: all-zero pseudo-label")
    aligned = align_to_pseudo_label(est_t, pseudo_t, align, geometry)
    return normalized_distance(aligned, pseudo_t)


@dataclass(frozen=True)
class LossParts:
    """Individual loss terms of one mini-batch; absent terms are None."""

    speech_simu: torch.Tensor | None = None
    noise_simu: torch.Tensor | None = None
    mixture_constraint: torch.Tensor | None = None
    speech_real: torch.Tensor | None = None


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar loss terms and the weighted total of one mini-batch.

    ``objective`` is the differentiable total; the float fields are for logs.
    """

    domain: Domain
    alpha: float
    total: float
    speech_simu: float = 0.0
    noise_simu: float = 0.0
    mixture_constraint: float = 0.0
    speech_real: float = 0.0
    objective: torch.Tensor | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict[str, float | str]:
        return {
            "domain": self.domain,
            "alpha": self.alpha,
            "total": self.total,
            "speech_simu": self.speech_simu,
            "noise_simu": self.noise_simu,
            "mixture_constraint": self.mixture_constraint,
            "speech_real": self.speech_real,
        }


def _enabled_terms(parts: LossParts, domain: Domain, flags: LossFlags) -> dict[str, torch.Tensor]:
    if domain == "simu":
        wanted = {
            "speech_simu": flags.simu_speech,
            "noise_simu": flags.simu_noise,
            "mixture_constraint": flags.simu_mixture,
        }
    else:
        wanted = {
            "speech_real": flags.real_speech,
            "mixture_constraint": flags.real_mixture,
        }
    terms = {}
    for name, enabled in wanted.items():
        value = getattr(parts, name)
        if enabled and value is not None:
            terms[name] = torch.as_tensor(value, dtype=torch.float64)
    return terms


def combined_loss(
    parts: LossParts, domain: Domain, flags: LossFlags, alpha: float = 5.0
) -> LossBreakdown:
    """Weighted total: ``alpha * sum(simu terms)`` or ``sum(real terms)``."""
    terms = _enabled_terms(parts, domain, flags)
    if not terms:
        raise SignalError(f"no enabled loss terms for a {domain} mini-batch")
    summed = torch.stack(list(terms.values())).sum()
    objective = alpha * summed if domain == "simu" else summed
    values = {name: float(term.detach()) for name, term in terms.items()}
    return LossBreakdown(
        domain=domain,
        alpha=alpha,
        total=float(objective.detach()),
        objective=objective,
        **values,
    )
