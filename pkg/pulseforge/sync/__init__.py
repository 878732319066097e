"""GCC-PHAT synchronization of close-talk and far-field recordings."""

from .gcc_phat import (
    MagnitudeSequenceSet,
    SyncResult,
    apply_frame_shift,
    estimate_frame_delay,
    gcc_phat_score,
    magnitude_sequences,
    synchronize_pair,
)

__all__ = [
    "MagnitudeSequenceSet",
    "SyncResult",
    "magnitude_sequences",
    "gcc_phat_score",
    "estimate_frame_delay",
    "apply_frame_shift",
    "synchronize_pair",
]
