# Copyright 2025 Medbrook Systems
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
pulseforge: close-talk pseudo-label speech enhancement at desk scale.

Synchronize paired close-talk and far-field recordings, enhance the close-talk
channel into pseudo-labels, and co-learn a far-field enhancement model from
simulated and pseudo-labelled real data through filter-aligned losses.
"""

from .config import (
    AlignConfig,
    FcpTapGeometry,
    LossFlags,
    ModelConfig,
    PipelineConfig,
    Settings,
    SimCorpusConfig,
    StftConfig,
    SyncConfig,
    TrainConfig,
)
from .dsp import Spectrogram, Waveform, istft, read_wav, stft, write_wav
from .errors import (
    AudioFormatError,
    CheckpointError,
    ConfigurationError,
    ManifestError,
    NonFiniteLossError,
    PulseforgeError,
    RankDeficientError,
    ShapeMismatchError,
    SignalError,
)

__version__ = "0.1.0"

__all__ = [
    "StftConfig",
    "SyncConfig",
    "FcpTapGeometry",
    "AlignConfig",
    "LossFlags",
    "ModelConfig",
    "TrainConfig",
    "SimCorpusConfig",
    "PipelineConfig",
    "Settings",
    "Waveform",
    "Spectrogram",
    "stft",
    "istft",
    "read_wav",
    "write_wav",
    "PulseforgeError",
    "SignalError",
    "ShapeMismatchError",
    "RankDeficientError",
    "AudioFormatError",
    "ManifestError",
    "CheckpointError",
    "NonFiniteLossError",
    "ConfigurationError",
]
