"""
Model checkpoint files.

Binary layout (little-endian)::

    4s   magic  b"PFCK"
    H    format version
    I    byte length L of the JSON header
    L    JSON header: model config, bin count, config hash, parameter names/shapes
    ...  float64 parameter tensors in state_dict order

Optimizer, scheduler and training counters go to a sidecar JSON next to the
checkpoint (``model.pfck`` -> ``model.json``) so they can be inspected by hand.
"""

import base64
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import torch

from ..config import ModelConfig, config_hash
from ..errors import CheckpointError
from .network import SpectralMappingNet
from .training import Trainer, TrainingState

logger = logging.getLogger(__name__)

MAGIC = b"PFCK"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sHI")


@dataclass
class ModelCheckpoint:
    model: SpectralMappingNet
    config: ModelConfig
    sidecar: dict[str, Any] | None = None

    @property
    def training_state(self) -> TrainingState | None:
        if not self.sidecar:
            return None
        return TrainingState.model_validate(self.sidecar["training_state"])


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def _encode(value: Any) -> Any:
    """JSON-safe form of optimizer/scheduler state; tensors become base64 float64."""
    if isinstance(value, torch.Tensor):
        array = value.detach().cpu().numpy()
        return {
            "__tensor__": base64.b64encode(array.astype("<f8").tobytes()).decode("ascii"),
            "shape": list(array.shape),
            "dtype": str(value.dtype).removeprefix("torch."),
        }
    if isinstance(value, dict):
        return {str(k): _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def _decode(value: Any) -> Any:
    if isinstance(value, dict):
        if "__tensor__" in value:
            raw = base64.b64decode(value["__tensor__"])
            array = np.frombuffer(raw, dtype="<f8").reshape(value["shape"]).copy()
            return torch.from_numpy(array).to(getattr(torch, value["dtype"]))
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def save_checkpoint(
    path: str | Path, model: SpectralMappingNet, trainer: Trainer | None = None
) -> Path:
    """Write the binary checkpoint and, when a trainer is given, its sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = model.state_dict()
    header = {
        "model_config": model.config.model_dump(mode="json"),
        "num_bins": model.num_bins,
        "config_hash": config_hash(model.config),
        "parameters": [{"name": name, "shape": list(t.shape)} for name, t in state.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for tensor in state.values():
            fh.write(tensor.detach().cpu().numpy().astype("<f8").tobytes())

    if trainer is not None:
        sidecar = {
            "config_hash": header["config_hash"],
            "train_config": trainer.config.model_dump(mode="json"),
            "training_state": trainer.state.model_dump(mode="json"),
            "optimizer": {
                "name": trainer.config.optimizer,
                "state": _encode(trainer.optimizer.state_dict()),
            },
            "scheduler": _encode(trainer.scheduler.state_dict()),
        }
        sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8")

    logger.info(f"Saved checkpoint {path} ({model.num_parameters} parameters)")
    return path


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    """Read a checkpoint written by ``save_checkpoint``."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        logger.error(f"Cannot read checkpoint {path}: {e}")
        raise CheckpointError(f"{path}: {e}") from e

    if len(raw) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, blob_length = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {version} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    offset = _HEADER.size
    try:
        header = json.loads(raw[offset : offset + blob_length].decode("utf-8"))
        config = ModelConfig.model_validate(header["model_config"])
    except (ValueError, KeyError) as e:
        raise CheckpointError(f"{path}: unreadable header ({e})") from e
    offset += blob_length

    model = SpectralMappingNet(config)
    expected = {name: tuple(t.shape) for name, t in model.state_dict().items()}
    state = {}
    for entry in header["parameters"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if expected.get(name) != shape:
            raise CheckpointError(f"{path}: parameter {name} has unexpected shape {shape}")
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated parameter data")
        array = np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
        state[name] = torch.from_numpy(array)
        offset = end
    if set(state) != set(expected):
        raise CheckpointError(f"{path}: parameter set does not match the model config")
    model.load_state_dict(state)

    sidecar = None
    if sidecar_path(path).exists():
        sidecar = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    return ModelCheckpoint(model, config, sidecar)


def restore_trainer(trainer: Trainer, checkpoint: ModelCheckpoint) -> None:
    """Resume optimizer, scheduler and counters from a checkpoint sidecar."""
    if not checkpoint.sidecar:
        raise CheckpointError("checkpoint has no sidecar with training state")
    sidecar = checkpoint.sidecar
    if sidecar["optimizer"]["name"] != trainer.config.optimizer:
        raise CheckpointError(
            f"checkpoint optimizer {sidecar['optimizer']['name']} does not match "
            f"{trainer.config.optimizer}"
        )
    optimizer_state = _decode(sidecar["optimizer"]["state"])
    optimizer_state["state"] = {int(k): v for k, v in optimizer_state["state"].items()}
    trainer.optimizer.load_state_dict(optimizer_state)
    trainer.scheduler.load_state_dict(_decode(sidecar["scheduler"]))
    trainer.state = TrainingState.model_validate(sidecar["training_state"])
