import numpy as np
import pytest
import torch

from antispoof.profiles import get_profile
from antispoof.synthdata import (ClassSignalSpec, DomainSpec, default_benchmark,
                                 make_dg_protocol)

torch.set_num_threads(2)


@pytest.fixture(scope="session")
def tiny_profile():
    return get_profile("tiny")


@pytest.fixture(scope="session")
def small_domains():
    """Four small domains for unit tests; real presets, reduced counts."""
    return default_benchmark(seed=11, n_videos=8, frames_per_video=8)


@pytest.fixture(scope="session")
def small_protocol(small_domains):
    return make_dg_protocol(small_domains, target_id=3)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_scores(rng, n=50):
    scores = rng.uniform(0, 1, n)
    labels = rng.integers(0, 2, n)
    if labels.min() == labels.max():  # both classes required
        labels[0] = 1 - labels[0]
    return scores, labels


@pytest.fixture(scope="session")
def neutral_domain_spec():
    return DomainSpec(domain_id=0)


@pytest.fixture(scope="session")
def default_signal():
    return ClassSignalSpec()


@pytest.fixture(scope="session")
def two_domain_sources(small_domains):
    """Image pools for two domains, keyed by domain id."""
    return {d.domain_id: d.images() for d in small_domains[:2]}
