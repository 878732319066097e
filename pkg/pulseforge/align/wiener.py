"""
Time-domain multi-tap Wiener filter aligning an estimate to a reference.

Taps cover lags l = -K..K (array index l + K) and the filter output is
``y[n] = sum_l h[l] * x[n - l]`` for n in [0, N), with x zero outside [0, N).
A positive lag delays the input. The normal equations use the exact Gram matrix
of that truncated convolution: the Toeplitz autocorrelation minus the products
that fall outside [0, N) at either end.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..config import StftConfig
from ..dsp.stft import stft
from ..dsp.types import Spectrogram, Waveform
from ..errors import ShapeMismatchError, SignalError
from .normal_equations import solve_normal_equations

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TdWienerFilter:
    """Real taps of length 2K+1; ``taps[K]`` is lag zero."""

    taps: np.ndarray

    def __post_init__(self) -> None:
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.shape[0] % 2 != 1:
            raise ShapeMismatchError(f"Wiener taps must be odd-length 1-D, got {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise SignalError("Wiener taps are not finite")
        object.__setattr__(self, "taps", taps)

    @property
    def half_width(self) -> int:
        return (self.taps.shape[0] - 1) // 2

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.half_width, self.half_width + 1)

    @property
    def dominant_lag(self) -> int:
        return int(self.lags[np.argmax(np.abs(self.taps))])

    @classmethod
    def impulse(cls, half_width: int, lag: int = 0, gain: float = 1.0) -> "TdWienerFilter":
        taps = np.zeros(2 * half_width + 1)
        taps[lag + half_width] = gain
        return cls(taps)


def _correlate(a: torch.Tensor, b: torch.Tensor, n_fft: int) -> torch.Tensor:
    """Circular ``c[m] = sum_n a[n + m] b[n]`` over n_fft points (no wrap if padded)."""
    spectrum = torch.fft.rfft(a, n=n_fft) * torch.fft.rfft(b, n=n_fft).conj()
    return torch.fft.irfft(spectrum, n=n_fft)


def _edge_sums(x: torch.Tensor, half_width: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Cumulative lagged products at the tail and the head of ``x``.

    ``tail[m, s] = sum_{u=N-s}^{N-1} x[u] x[u-m]`` and
    ``head[m, s] = sum_{u=0}^{s-1} x[u] x[u+m]`` for m in [0, 2K], s in [0, K].
    """
    n = x.shape[-1]
    span = 2 * half_width
    lags = torch.arange(span + 1)[:, None]
    steps = torch.arange(half_width)[None, :]
    zeros = x.new_zeros(span)

    before = torch.cat([zeros, x])
    tail_positions = (n - 1 - steps) + span
    tail = before[tail_positions] * before[tail_positions - lags]

    after = torch.cat([x, zeros])
    head = after[steps] * after[steps + lags]

    pad = x.new_zeros(span + 1, 1)
    return (
        torch.cat([pad, tail.cumsum(dim=-1)], dim=-1),
        torch.cat([pad, head.cumsum(dim=-1)], dim=-1),
    )


def wiener_normal_equations(
    est: torch.Tensor, target: torch.Tensor, half_width: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Gram matrix ``(2K+1, 2K+1)`` and cross-correlation ``(2K+1,)`` vector."""
    n = est.shape[-1]
    span = 2 * half_width
    n_fft = 1 << (n + span).bit_length()

    auto = _correlate(est, est, n_fft)[: span + 1]
    cross_full = _correlate(target, est, n_fft)
    cross = torch.cat([cross_full[n_fft - half_width :], cross_full[: half_width + 1]])

    lags = torch.arange(-half_width, half_width + 1)
    row, col = lags[:, None], lags[None, :]
    distance = (row - col).abs()
    lower = torch.minimum(row, col)
    upper = torch.maximum(row, col)

    tail, head = _edge_sums(est, half_width)
    gram = auto[distance]
    gram = gram - torch.where(lower >= 1, tail[distance, lower.clamp(0, half_width)], 0.0)
    gram = gram - torch.where(upper <= -1, head[distance, (-upper).clamp(0, half_width)], 0.0)
    return 0.5 * (gram + gram.T), cross


def wiener_taps_tensor(
    est: torch.Tensor,
    target: torch.Tensor,
    half_width: int,
    ridge: float | None = None,
    relative_ridge: float = 1e-6,
) -> torch.Tensor:
    """Closed-form 2K+1 taps mapping ``est`` onto ``target`` (1-D tensors)."""
    if est.shape != target.shape or est.dim() != 1:
        raise ShapeMismatchError(
            f"estimate {tuple(est.shape)} and target {tuple(target.shape)} must be "
            "equal-length 1-D signals"
        )
    if half_width < 0:
        raise ShapeMismatchError(f"K must be non-negative, got {half_width}")
    if est.shape[0] <= 2 * half_width + 1:
        raise SignalError(
            f"input too short: {est.shape[0]} samples for a {2 * half_width + 1}-tap filter"
        )
    gram, cross = wiener_normal_equations(est, target, half_width)
    return solve_normal_equations(gram, cross, ridge, relative_ridge)


def apply_td_filter_tensor(est: torch.Tensor, taps: torch.Tensor) -> torch.Tensor:
    """Filter ``(..., N)`` signals with ``(2K+1,)`` taps, keeping [0, N)."""
    half_width = (taps.shape[-1] - 1) // 2
    leading = est.shape[:-1]
    flat = est.reshape(-1, 1, est.shape[-1])
    kernel = taps.flip(-1).reshape(1, 1, -1)
    return F.conv1d(flat, kernel, padding=half_width).reshape(*leading, est.shape[-1])


def estimate_td_wiener(
    est: Waveform,
    target: Waveform,
    half_width: int = 64,
    ridge: float | None = None,
    relative_ridge: float = 1e-6,
) -> TdWienerFilter:
    """Wiener filter with K past and K future taps."""
    if len(est) != len(target):
        raise ShapeMismatchError(
            f"estimate has {len(est)} samples, target has {len(target)}"
        )
    taps = wiener_taps_tensor(
        torch.from_numpy(est.samples),
        torch.from_numpy(target.samples),
        half_width,
        ridge,
        relative_ridge,
    )
    return TdWienerFilter(taps.numpy())


def apply_td_filter(est: Waveform, filt: TdWienerFilter) -> Waveform:
    k = filt.half_width
    full = np.convolve(est.samples, filt.taps, mode="full")
    return est.with_samples(full[k : k + len(est)])


def apply_td_filter_stft(
    est: Waveform, filt: TdWienerFilter, config: StftConfig
) -> Spectrogram:
    """STFT of the filtered time-domain estimate."""
    return stft(apply_td_filter(est, filt), config)
