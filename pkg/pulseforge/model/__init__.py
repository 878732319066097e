"""Enhancement network, training loop and checkpoints."""

from .augment import draw_snr_shift, noise_gain_for_shift, snr_augment, snr_db
from .checkpoint import (
    CHECKPOINT_VERSION,
    ModelCheckpoint,
    load_checkpoint,
    restore_trainer,
    save_checkpoint,
)
from .network import SpectralMappingNet, enhance
from .schedule import co_learning_schedule, simu_probability
from .training import (
    Batch,
    EpochRecord,
    Trainer,
    TrainingExample,
    TrainingState,
    compute_gradients,
    evaluation_channel_sets,
    select_channels,
)

__all__ = [
    "SpectralMappingNet",
    "enhance",
    "compute_gradients",
    "snr_augment",
    "snr_db",
    "draw_snr_shift",
    "noise_gain_for_shift",
    "co_learning_schedule",
    "simu_probability",
    "Trainer",
    "TrainingExample",
    "TrainingState",
    "EpochRecord",
    "Batch",
    "select_channels",
    "evaluation_channel_sets",
    "ModelCheckpoint",
    "CHECKPOINT_VERSION",
    "save_checkpoint",
    "load_checkpoint",
    "restore_trainer",
]
