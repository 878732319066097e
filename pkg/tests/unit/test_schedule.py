"""Tests for the simulated/real co-learning schedule."""

from collections import Counter
from itertools import islice

import numpy as np
import pytest

from pulseforge.errors import ConfigurationError
from pulseforge.model import co_learning_schedule, simu_probability


def test_no_real_data_means_all_simulated():
    """Without real data every batch is simulated."""
    schedule = co_learning_schedule(["a", "b"], [], np.random.default_rng(0))

    assert {domain for _, domain in islice(schedule, 200)} == {"simu"}


def test_ratio_is_respected():
    """An explicit ratio sets the share of simulated batches."""
    schedule = co_learning_schedule(list(range(20)), list(range(10)), np.random.default_rng(0), 0.5)

    simulated = sum(domain == "simu" for _, domain in islice(schedule, 10000))

    assert 0.48 <= simulated / 10000 <= 0.52


def test_default_ratio_follows_corpus_sizes():
    """The default share follows the corpus sizes."""
    assert simu_probability(200, 100) == pytest.approx(2 / 3)
    assert simu_probability(0, 5) == 0.0
    assert simu_probability(5, 5, 0.9) == 0.9


def test_empty_corpora():
    """Two empty corpora are a configuration error."""
    with pytest.raises(ConfigurationError):
        simu_probability(0, 0)


def test_same_seed_same_schedule():
    """The schedule depends only on the seed."""
    def draw(seed):
        schedule = co_learning_schedule(list("abcd"), list("xyz"), np.random.default_rng(seed))
        return list(islice(schedule, 50))

    assert draw(3) == draw(3)
    assert draw(3) != draw(4)


def test_each_pass_visits_every_item_once():
    """One pass draws every item exactly once."""
    items = list(range(7))
    schedule = co_learning_schedule(items, [], np.random.default_rng(1))

    first_pass = [batch[0] for batch, _ in islice(schedule, 7)]

    assert Counter(first_pass) == Counter(items)


def test_batches_have_requested_size():
    """Batches carry the requested number of items."""
    schedule = co_learning_schedule(list(range(5)), list(range(5)), np.random.default_rng(2), batch_size=3)

    for batch, _ in islice(schedule, 20):
        assert len(batch) == 3
