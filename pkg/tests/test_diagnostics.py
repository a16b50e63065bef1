import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irs_swipt import diagnostics as dg
from irs_swipt import feasibility as fz
from irs_swipt import hybrid
from irs_swipt.channel import ChannelSet, FadingParams, Geometry, cascade_and_stack, sample_channels
from irs_swipt.metrics import NoiseAndPower, SchemeSolution


def direct_network(h):
    h = np.asarray(h, complex)
    K, _, M = h.shape
    return cascade_and_stack(ChannelSet(h=h, G=np.zeros((K, K, 0, M), complex), f=np.zeros((K, K, 0), complex)))


def one_slot(W, P):
    S = np.asarray(W, complex)[None, None]
    return SchemeSolution("tdma", S, np.ones((1, 1), complex), np.ones(1)), np.array([P])


def test_rank_one_and_full_rank_examples():
    P = 0.2
    u = np.array([1.0, 1j]) / np.sqrt(2)
    sol, Pv = one_slot(P * np.outer(u, u.conj()), P)
    e = dg.rank_check(sol, Pv).entries[0]
    assert e.effective_rank == 1 and e.active and e.full_power
    sol, Pv = one_slot(P / 2 * np.eye(2), P)
    e = dg.rank_check(sol, Pv).entries[0]
    assert e.effective_rank == 2 and e.full_power
    assert dg.effective_rank(np.zeros((2, 2))) == 0


def test_counting_rules():
    S = np.zeros((1, 3, 2, 2), complex)
    S[0, 0] = 0.1 * np.eye(2)            # inactive slot
    S[0, 1] = np.diag([0.05, 0.0])       # below full power
    S[0, 2] = np.diag([0.2, 0.0])
    sol = SchemeSolution("hybrid", S, np.ones((3, 1), complex), np.array([0.0, 0.5, 0.5]), np.ones(1))
    rep = dg.rank_check(sol, NoiseAndPower.uniform(1, P=0.2))
    assert [e.active for e in rep.entries] == [False, True, True]
    assert [e.full_power for e in rep.entries] == [True, False, True]
    assert rep.counted == 1 and rep.rank_le1 == 1 and rep.fraction_rank_le1 == 1.0
    assert np.isnan(dg.RankReport().fraction_rank_le1)
    agg = dg.aggregate([rep, dg.RankReport()])
    assert agg == {"counted": 1, "rank_le1": 1, "fraction": 1.0}


@given(st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_rank_within_bounds(M, seed):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(0, M + 1))
    X = rng.standard_normal((M, r)) + 1j * rng.standard_normal((M, r))
    W = X @ X.conj().T
    assert 0 <= dg.effective_rank(W) <= M
    assert dg.effective_rank(W) == r


def test_rank_check_is_pure():
    ch = sample_channels(0, Geometry(K=2, N_total=10), FadingParams(), 2)
    noise = NoiseAndPower.uniform(2, E=0.5e-6)
    rep = fz.hybrid_feasibility(ch, noise, np.random.default_rng(0))
    sol = hybrid.ao_solve(ch, noise, fz.ps_initial_point(rep, ch, noise), "ps")
    before = sol.copy()
    a, b = dg.rank_check(sol, noise), dg.rank_check(sol, noise)
    assert np.array_equal(sol.S, before.S) and np.array_equal(sol.tau, before.tau)
    for x, y in zip(a.entries, b.entries):
        assert np.array_equal(x.eigenvalues, y.eigenvalues)
        assert (x.i, x.j, x.effective_rank, x.active, x.full_power) == (y.i, y.j, y.effective_rank, y.active,
                                                                         y.full_power)


def test_condition_flags_single_antenna():
    flags = dg.condition_flags(direct_network([[[0.3 + 0.1j]]]))
    assert flags.multiplicity.tolist() == [1] and flags.simple


def test_condition_flags_degenerate():
    # orthogonal rows of equal norm spread the energy evenly over both directions
    h = np.zeros((2, 2, 2), complex)
    h[0, 0], h[0, 1] = [1, 0], [0, 1]
    h[1, 0], h[1, 1] = [1, 1], [1, -1]
    flags = dg.condition_flags(direct_network(0.01 * h))
    assert flags.multiplicity.tolist() == [2, 2] and not flags.simple
    assert dg.condition_flags(direct_network(np.zeros((1, 1, 3)))).multiplicity.tolist() == [3]


def test_condition_flags_random_draws():
    simple = 0
    for seed in range(100):
        ch = sample_channels(seed, Geometry(K=2, N_total=10), FadingParams(), 2)
        simple += dg.condition_flags(ch).simple
    assert simple == 100
