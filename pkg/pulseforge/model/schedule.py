"""Random interleaving of simulated and real mini-batches for co-learning."""

from collections.abc import Iterator, Sequence
from typing import TypeVar

import numpy as np

from ..config import Domain
from ..errors import ConfigurationError

T = TypeVar("T")


class _Cycle:
    """Endless reshuffled pass over a pool of items."""

    def __init__(self, items: Sequence[T], rng: np.random.Generator) -> None:
        self.items = items
        self.rng = rng
        self.order: list[int] = []

    def take(self, count: int) -> list:
        batch = []
        while len(batch) < count:
            if not self.order:
                self.order = list(self.rng.permutation(len(self.items)))
            batch.append(self.items[self.order.pop()])
        return batch


def simu_probability(num_simu: int, num_real: int, ratio: float | None = None) -> float:
    """Chance of drawing a simulated batch: ``ratio`` or the corpus-size share."""
    if num_simu == 0 and num_real == 0:
        raise ConfigurationError("co-learning needs at least one non-empty corpus")
    if num_real == 0:
        return 1.0
    if num_simu == 0:
        return 0.0
    if ratio is not None:
        return ratio
    return num_simu / (num_simu + num_real)


def co_learning_schedule(
    simu: Sequence[T],
    real: Sequence[T],
    rng: np.random.Generator,
    simu_ratio: float | None = None,
    batch_size: int = 1,
) -> Iterator[tuple[list[T], Domain]]:
    """Yield ``(batch, domain)`` forever.

    Each step is simulated with probability ``simu_probability``; within a
    domain, items are drawn without replacement until the pool is exhausted.
    """
    probability = simu_probability(len(simu), len(real), simu_ratio)
    pools = {"simu": _Cycle(simu, rng), "real": _Cycle(real, rng)}
    while True:
        domain: Domain = "simu" if rng.random() < probability else "real"
        yield pools[domain].take(batch_size), domain
