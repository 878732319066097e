"""Closed-form filters aligning an estimate to a reference."""

from .fcp import (
    FcpFilter,
    apply_fcp,
    apply_fcp_tensor,
    estimate_fcp_filter,
    fcp_taps_tensor,
    stack_taps,
    stack_taps_tensor,
)
from .normal_equations import solve_normal_equations
from .wiener import (
    TdWienerFilter,
    apply_td_filter,
    apply_td_filter_stft,
    apply_td_filter_tensor,
    estimate_td_wiener,
    wiener_taps_tensor,
)

__all__ = [
    "FcpFilter",
    "TdWienerFilter",
    "stack_taps",
    "stack_taps_tensor",
    "estimate_fcp_filter",
    "fcp_taps_tensor",
    "apply_fcp",
    "apply_fcp_tensor",
    "estimate_td_wiener",
    "wiener_taps_tensor",
    "apply_td_filter",
    "apply_td_filter_tensor",
    "apply_td_filter_stft",
    "solve_normal_equations",
]
