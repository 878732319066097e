"""Named random sub-streams derived from one seed.

Every stochastic component (corpus, schedule, augmentation, cropping, model
init) asks for its own stream by name, so changing how often one component
draws never perturbs another.
"""

import zlib

import numpy as np
import torch


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Return a numpy Generator for the sub-stream ``name`` of ``seed``."""
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))


def torch_generator(seed: int, name: str) -> torch.Generator:
    """Return a CPU torch.Generator for the sub-stream ``name`` of ``seed``."""
    state = named_rng(seed, name).integers(0, 2**63 - 1)
    generator = torch.Generator(device="cpu")
    generator.manual_seed(int(state))
    return generator
