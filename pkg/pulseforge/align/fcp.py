"""
Forward convolutive prediction (FCP): per-frequency linear projection of an
estimate onto a reference.

For each frequency f the filter g(f) has I + J taps and is applied as
``out(t, f) = g(f)^H w(t, f)`` where ``w(t, f)`` stacks frames t-I+1 .. t+J of
the estimate (frames outside the signal read as zero). The closed form solves
``(sum_t w w^H + eps I) g = sum_t w conj(target)``.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch

from ..config import FcpTapGeometry
from ..dsp.types import Spectrogram
from ..errors import ShapeMismatchError
from .normal_equations import solve_normal_equations

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FcpFilter:
    """Per-frequency complex taps, ``taps[f, j]`` for window offset j."""

    taps: np.ndarray
    geometry: FcpTapGeometry

    def __post_init__(self) -> None:
        taps = np.asarray(self.taps, dtype=np.complex128)
        if taps.ndim != 2 or taps.shape[1] != self.geometry.num_taps:
            raise ShapeMismatchError(
                f"FCP taps must be (F, {self.geometry.num_taps}), got {taps.shape}"
            )
        object.__setattr__(self, "taps", taps)

    @classmethod
    def identity(cls, num_bins: int, geometry: FcpTapGeometry) -> "FcpFilter":
        """Unit tap on the current frame, zero elsewhere."""
        if geometry.past_taps < 1:
            raise ShapeMismatchError("identity filter needs a tap on the current frame")
        taps = np.zeros((num_bins, geometry.num_taps), dtype=np.complex128)
        taps[:, geometry.past_taps - 1] = 1.0
        return cls(taps, geometry)


def stack_taps_tensor(spec: torch.Tensor, geometry: FcpTapGeometry) -> torch.Tensor:
    """``(..., T, F)`` -> ``(..., T, F, I+J)`` windows of neighbouring frames."""
    num_frames = spec.shape[-2]
    offsets = torch.arange(-geometry.past_taps + 1, geometry.future_taps + 1)
    index = torch.arange(num_frames)[:, None] + offsets[None, :]
    valid = (index >= 0) & (index < num_frames)
    gathered = spec[..., index.clamp(0, num_frames - 1), :]  # (..., T, n, F)
    gathered = gathered * valid[..., None].to(gathered.dtype)
    return gathered.transpose(-1, -2)


def stack_taps(est: Spectrogram, geometry: FcpTapGeometry) -> np.ndarray:
    return stack_taps_tensor(torch.from_numpy(est.data), geometry).numpy()


def fcp_taps_tensor(
    est: torch.Tensor,
    target: torch.Tensor,
    geometry: FcpTapGeometry,
    ridge: float | None = None,
    relative_ridge: float = 1e-6,
) -> torch.Tensor:
    """Closed-form FCP taps ``(..., F, I+J)`` for ``(..., T, F)`` inputs."""
    if est.shape != target.shape:
        raise ShapeMismatchError(
            f"estimate {tuple(est.shape)} and target {tuple(target.shape)} differ"
        )
    windows = stack_taps_tensor(est, geometry)
    gram = torch.einsum("...tfi,...tfj->...fij", windows, windows.conj())
    rhs = torch.einsum("...tfi,...tf->...fi", windows, target.conj())
    return solve_normal_equations(gram, rhs, ridge, relative_ridge)


def apply_fcp_tensor(
    est: torch.Tensor, taps: torch.Tensor, geometry: FcpTapGeometry
) -> torch.Tensor:
    windows = stack_taps_tensor(est, geometry)
    return torch.einsum("...tfi,...fi->...tf", windows, taps.conj())


def estimate_fcp_filter(
    est: Spectrogram,
    target: Spectrogram,
    geometry: FcpTapGeometry,
    ridge: float | None = None,
    relative_ridge: float = 1e-6,
) -> FcpFilter:
    """Per-frequency taps projecting ``est`` onto ``target`` in least squares."""
    taps = fcp_taps_tensor(
        torch.from_numpy(est.data),
        torch.from_numpy(target.data),
        geometry,
        ridge,
        relative_ridge,
    )
    return FcpFilter(taps.numpy(), geometry)


def apply_fcp(est: Spectrogram, filt: FcpFilter) -> Spectrogram:
    if filt.taps.shape[0] != est.num_bins:
        raise ShapeMismatchError(
            f"filter has {filt.taps.shape[0]} bins, spectrogram has {est.num_bins}"
        )
    out = apply_fcp_tensor(
        torch.from_numpy(est.data), torch.from_numpy(filt.taps), filt.geometry
    )
    return est.with_data(out.numpy())
