"""Training losses and evaluation metrics."""

from .metrics import (
    SDR_CAP_DB,
    MetricsReport,
    UtteranceMetrics,
    filtered_sdr,
    si_sdr,
    speaker_reinforcement,
)
from .spectral import (
    LossBreakdown,
    LossParts,
    align_to_pseudo_label,
    combined_loss,
    loss_mixture_constraint,
    loss_noise_simu,
    loss_speech_real,
    loss_speech_simu,
    normalized_distance,
    ri_mag_distance,
)

__all__ = [
    "ri_mag_distance",
    "normalized_distance",
    "loss_speech_simu",
    "loss_noise_simu",
    "loss_mixture_constraint",
    "loss_speech_real",
    "align_to_pseudo_label",
    "LossParts",
    "LossBreakdown",
    "combined_loss",
    "si_sdr",
    "filtered_sdr",
    "speaker_reinforcement",
    "SDR_CAP_DB",
    "UtteranceMetrics",
    "MetricsReport",
]
