"""Synthetic test signals."""

import numpy as np


def faded_noise(
    rng: np.random.Generator, length: int, fade: int = 200, guard: int = 10
) -> np.ndarray:
    """White noise that is exactly zero for ``guard`` samples at each end, then ramps in."""
    x = rng.standard_normal(length)
    ramp = np.sin(0.5 * np.pi * np.arange(fade) / fade) ** 2
    envelope = np.ones(length)
    envelope[:guard] = 0.0
    envelope[-guard:] = 0.0
    envelope[guard : guard + fade] = ramp
    envelope[length - guard - fade : length - guard] = ramp[::-1]
    return x * envelope
