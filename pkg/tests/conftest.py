import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from irs_swipt.channel import cascade_and_stack, ChannelSet

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_channels(rng, K, M, L, Nl, scale=1.0):
    cn = lambda *s: (rng.standard_normal(s) + 1j * rng.standard_normal(s)) / np.sqrt(2)
    return cascade_and_stack(ChannelSet(h=scale * cn(K, K, M), G=scale * cn(K, L, Nl, M), f=cn(L, K, Nl)))


def random_psd(rng, M, P):
    A = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    S = A @ A.conj().T
    return S * (P * rng.uniform(0.1, 1.0) / np.trace(S).real)


def random_phases(rng, N, count):
    v = np.exp(2j * np.pi * rng.random((count, N))) * rng.uniform(0.2, 1.0, (count, N))
    return np.concatenate([v, np.ones((count, 1))], axis=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
