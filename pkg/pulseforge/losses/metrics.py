"""Evaluation metrics, speaker reinforcement and the metrics report model."""

import logging
import math
from collections import defaultdict

import numpy as np
from pydantic import BaseModel, Field, computed_field

from ..align.wiener import apply_td_filter, estimate_td_wiener
from ..config import SCHEMA_VERSION, Domain
from ..dsp.types import Waveform
from ..errors import ShapeMismatchError, SignalError

logger = logging.getLogger(__name__)

SDR_CAP_DB = 60.0


def _check_pair(est: Waveform, ref: Waveform) -> None:
    if len(est) != len(ref):
        raise ShapeMismatchError(f"estimate has {len(est)} samples, reference has {len(ref)}")


def si_sdr(est: Waveform, ref: Waveform) -> float:
    """Scale-invariant SDR in dB, clipped to +/-60 dB."""
    _check_pair(est, ref)
    ref_energy = ref.energy
    if ref_energy <= 0:
        raise SignalError("degenerate reference: all-zero signal")
    scale = float(np.dot(est.samples, ref.samples)) / ref_energy
    target = scale * ref.samples
    residual = est.samples - target
    target_energy = float(np.dot(target, target))
    residual_energy = float(np.dot(residual, residual))
    if target_energy <= 0:
        return -SDR_CAP_DB
    if residual_energy <= 0:
        return SDR_CAP_DB
    value = 10.0 * math.log10(target_energy / residual_energy)
    return float(np.clip(value, -SDR_CAP_DB, SDR_CAP_DB))


def filtered_sdr(est: Waveform, ref: Waveform, half_width: int = 256) -> float:
    """SI-SDR after aligning ``est`` to ``ref`` with a time-domain Wiener filter.

    The filter is centred on lag 0 with ``half_width`` taps on each side, so it
    always has an odd length: the default of 256 gives 513 taps, the nearest
    centred size to a 512-tap filter.
    """
    _check_pair(est, ref)
    if est.energy <= 0:
        return -SDR_CAP_DB
    if len(est) <= 2 * half_width + 1:
        return si_sdr(est, ref)
    filt = estimate_td_wiener(est, ref, half_width)
    return si_sdr(apply_td_filter(est, filt), ref)


def speaker_reinforcement(est: Waveform, mixture: Waveform, gamma_db: float) -> Waveform:
    """Add the mixture back at ``gamma_db`` below the estimate's energy."""
    _check_pair(est, mixture)
    est_norm = math.sqrt(est.energy)
    mixture_norm = math.sqrt(mixture.energy)
    if mixture_norm <= 0:
        raise SignalError("speaker reinforcement needs a non-zero mixture")
    if est_norm <= 0:
        raise SignalError("speaker reinforcement needs a non-zero estimate")
    eta = est_norm / (mixture_norm * 10.0 ** (gamma_db / 20.0))
    return est.with_samples(est.samples + eta * mixture.samples)


class UtteranceMetrics(BaseModel):
    """Scores of one enhanced utterance (channel-averaged for 1-ch models)."""

    id: str
    domain: Domain
    mixture_si_sdr_db: float
    si_sdr_db: float
    sdr_db: float
    si_sdr_reinforced_db: float | None = None


class MetricsReport(BaseModel):
    """Per-utterance metrics with per-domain and overall means."""

    schema_version: str = SCHEMA_VERSION
    system: str = Field(description="Name of the evaluated model")
    gamma_db: float | None = None
    utterances: list[UtteranceMetrics] = Field(default_factory=list)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def mean(self) -> dict[str, dict[str, float]]:
        groups: dict[str, list[UtteranceMetrics]] = defaultdict(list)
        for item in self.utterances:
            groups[item.domain].append(item)
            groups["all"].append(item)
        summary = {}
        for name in sorted(groups):
            items = groups[name]
            row = {
                "count": float(len(items)),
                "mixture_si_sdr_db": float(np.mean([u.mixture_si_sdr_db for u in items])),
                "si_sdr_db": float(np.mean([u.si_sdr_db for u in items])),
                "sdr_db": float(np.mean([u.sdr_db for u in items])),
            }
            reinforced = [u.si_sdr_reinforced_db for u in items if u.si_sdr_reinforced_db is not None]
            if reinforced:
                row["si_sdr_reinforced_db"] = float(np.mean(reinforced))
            row["si_sdr_improvement_db"] = row["si_sdr_db"] - row["mixture_si_sdr_db"]
            summary[name] = row
        return summary
