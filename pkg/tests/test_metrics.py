import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle
from conftest import random_channels, random_phases, random_psd
from irs_swipt import metrics
from irs_swipt.channel import ChannelSet, cascade_and_stack
from irs_swipt.metrics import NoiseAndPower, SchemeSolution

def scalar_channel(h_val, K=1):
    h = np.full((K, K, 1), h_val, dtype=complex)
    return cascade_and_stack(ChannelSet(h=h, G=np.zeros((K, 1, 0, 1), complex), f=np.zeros((1, K, 0), complex)))


def instance(rng, K, M, N, slots):
    L = int(rng.choice([d for d in range(1, N + 1) if N % d == 0] or [1]))
    Nl = N // L
    ch = random_channels(rng, K, M, L, Nl)
    noise = NoiseAndPower.uniform(K, P=1.0, sigma_ant_sq=0.3, sigma_proc_sq=0.2, zeta=0.7)
    S = np.array([[random_psd(rng, M, noise.P[i]) for _ in range(slots)] for i in range(K)])
    v = random_phases(rng, ch.N, slots)
    return ch, noise, S, v


def test_effective_channel_direct_only(rng):
    ch = random_channels(rng, 2, 3, 1, 4)
    v = np.zeros(5, dtype=complex)
    v[-1] = 1.0
    assert np.allclose(metrics.effective_channel(ch.H[0, 1], v), ch.h[0, 1])
    with pytest.raises(ValueError):
        metrics.effective_channel(ch.H[0, 1], np.ones(3))
    ch0 = random_channels(rng, 2, 3, 1, 0)
    assert np.allclose(metrics.effective_channel(ch0.H[1, 0], np.ones(1)), ch0.h[1, 0])


def test_single_user_sinrs():
    ch = scalar_channel(1.0)
    n = NoiseAndPower.uniform(1, P=2.0, sigma_ant_sq=0.3, sigma_proc_sq=0.2)
    S = np.full((1, 3, 1, 1), 2.0, dtype=complex)
    v = np.ones((3, 1))
    assert metrics.sinr_hybrid_slot2(ch, S[:, 1], v[1], np.ones(1), n)[0] == pytest.approx(2.0 / 0.5)
    assert metrics.sinr_hybrid_slot3(ch, S[:, 2], v[2], n)[0] == pytest.approx(2.0 / 0.5)
    assert metrics.sinr_hybrid_slot2(ch, S[:, 1], v[1], np.zeros(1), n)[0] == 0.0
    assert metrics.sinr_hybrid_slot2(ch, S[:, 1], v[1], np.array([1e-12]), n)[0] < 1e-10
    assert metrics.sinr_hybrid_slot3(ch, 0 * S[:, 2], v[2], n)[0] == 0.0
    St = np.full((1, 1, 1, 1), 2.0, dtype=complex)
    assert metrics.sinr_tdma(ch, St, np.ones((1, 1)), n)[0] == pytest.approx(4.0)
    assert metrics.sinr_tdma_d(ch, St, np.ones((1, 1)), n)[0] == pytest.approx(4.0)
    assert metrics.sinr_tdma(ch, 0 * St, np.ones((1, 1)), n)[0] == 0.0


def test_hybrid_energy_examples():
    ch = scalar_channel(1.0)
    S = np.full((1, 3, 1, 1), 2.0, dtype=complex)
    v = np.ones((3, 1))
    assert metrics.harvested_energy_hybrid(ch, S, v, [1, 0, 0], [0.3], 1.0)[0] == pytest.approx(2.0)
    assert metrics.harvested_energy_hybrid(ch, S, v, [0, 0.6, 0.4], [1.0], 1.0)[0] == 0.0


def test_tdma_energy_examples(rng):
    ch = scalar_channel(1.0)
    assert metrics.harvested_energy_tdma(ch, np.ones((1, 1, 1, 1)), np.ones((1, 1)), [1.0], 0.7)[0] == 0.0
    ch2, noise, S, v = instance(rng, 2, 2, 2, 2)
    q1 = metrics.harvested_energy_tdma(ch2, S, v, [0.4, 0.6], 1.0)
    q2 = metrics.harvested_energy_tdma(ch2, S, v, [0.4, 0.6], 0.5)
    assert np.allclose(q2, 0.5 * q1)


def test_sum_rate_edge_cases(rng):
    ch, noise, S, v = instance(rng, 2, 2, 2, 3)
    sol = SchemeSolution("hybrid", S, v, np.array([1.0, 0.0, 0.0]), np.array([0.5, 0.5]))
    assert metrics.sum_rate("hybrid", ch, sol, noise) == 0.0
    ps = SchemeSolution("ps", S, v, np.array([0.0, 1.0, 0.0]), np.array([0.5, 0.5]))
    direct = np.sum(np.log2(1 + metrics.sinr_hybrid_slot2(ch, S[:, 1], v[1], ps.rho, noise)))
    assert metrics.sum_rate("ps", ch, ps, noise) == pytest.approx(direct, rel=1e-12)
    with pytest.raises(ValueError):
        metrics.sum_rate("ofdma", ch, sol, noise)


def test_residual_examples(rng):
    ch, noise, S, v = instance(rng, 2, 2, 2, 3)
    sol = SchemeSolution("hybrid", S, v, np.array([0.3, 0.3, 0.4]), np.array([0.5, 0.5]))
    rep = metrics.constraint_residuals("hybrid", ch, sol, noise)
    assert rep.eh >= 0 and rep.feasible
    zero = SchemeSolution("hybrid", 0 * S, v, sol.tau, sol.rho)
    rep0 = metrics.constraint_residuals("hybrid", ch, zero, noise.with_E(1e-3))
    assert rep0.eh == pytest.approx(-1.0) and not rep0.feasible


def test_residuals_match_hand_computed_energy(rng):
    ch, noise, S, v = instance(rng, 2, 2, 2, 3)
    tau, rho = np.array([0.2, 0.5, 0.3]), np.array([0.4, 0.7])
    Q = oracle.hybrid_energy(ch, S, v, tau, rho, noise.zeta)
    E = np.array([0.9 * Q[0], 1.1 * Q[1]])
    rep = metrics.constraint_residuals("hybrid", ch, SchemeSolution("hybrid", S, v, tau, rho), noise.with_E(E))
    assert rep.eh == pytest.approx(min((Q[0] - E[0]) / E[0], (Q[1] - E[1]) / E[1]), rel=1e-9)
    assert np.allclose(rep.energy, Q, rtol=1e-10)


def test_residuals_flag_each_violation(rng):
    ch, noise, S, v = instance(rng, 2, 2, 2, 3)
    base = SchemeSolution("hybrid", S, v, np.array([0.3, 0.3, 0.4]), np.array([0.5, 0.5]))
    assert metrics.constraint_residuals("hybrid", ch, base, noise).feasible
    bad = base.copy()
    bad.tau = np.array([0.5, 0.5, 0.4])
    assert metrics.constraint_residuals("hybrid", ch, bad, noise).time < -1e-6
    bad = base.copy()
    bad.S[0, 1] *= 3 / np.trace(bad.S[0, 1]).real
    assert metrics.constraint_residuals("hybrid", ch, bad, noise).power < -1e-6
    bad = base.copy()
    bad.v[0, 0] = 1.5
    assert metrics.constraint_residuals("hybrid", ch, bad, noise).modulus < -1e-6
    bad = base.copy()
    bad.v[1, -1] = 1j
    assert not metrics.constraint_residuals("hybrid", ch, bad, noise).feasible
    bad = base.copy()
    bad.rho = np.array([1.2, 0.5])
    assert metrics.constraint_residuals("hybrid", ch, bad, noise).rho < -1e-6


@given(st.integers(0, 2 ** 32 - 1))
def test_tdma_d_dominates_tdma(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 4))
    ch, noise, S, v = instance(rng, K, 2, 2, K)
    assert np.all(metrics.sinr_tdma_d(ch, S, v, noise) >= metrics.sinr_tdma(ch, S, v, noise))


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 1.0))
def test_signal_linear_in_covariance(seed, c):
    rng = np.random.default_rng(seed)
    ch, noise, S, v = instance(rng, 2, 2, 2, 3)
    a = metrics.effective_channels(ch, v)
    g = metrics.quad_gains(a, S)
    gc = metrics.quad_gains(a, c * S)
    assert np.allclose(gc, c * g, rtol=1e-12, atol=0)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 1.0), st.floats(0.05, 1.0))
def test_hybrid_energy_linear(seed, t, z):
    rng = np.random.default_rng(seed)
    ch, noise, S, v = instance(rng, 2, 2, 2, 3)
    rho = rng.random(2)
    q_e1 = metrics.harvested_energy_hybrid(ch, S, v, [t, 0, 0], rho, z)
    q_11 = metrics.harvested_energy_hybrid(ch, S, v, [1, 0, 0], rho, 1.0)
    assert np.allclose(q_e1, t * z * q_11, rtol=1e-12, atol=1e-15)
    q_S = metrics.harvested_energy_hybrid(ch, 2 * S, v, [0.3, 0.4, 0.3], rho, z)
    q = metrics.harvested_energy_hybrid(ch, S, v, [0.3, 0.4, 0.3], rho, z)
    assert np.allclose(q_S, 2 * q, rtol=1e-12)


def test_noise_validation():
    with pytest.raises(ValueError):
        NoiseAndPower.uniform(2, P=0.0)
    with pytest.raises(ValueError):
        NoiseAndPower.uniform(2, zeta=1.5)
    with pytest.raises(ValueError):
        NoiseAndPower.uniform(2, E=-1.0)
    n = NoiseAndPower.uniform(2, sigma_ant_sq=1.0, sigma_proc_sq=2.0)
    assert np.allclose(n.sigma_sq, 3.0)
    assert np.allclose(n.with_E(4.0).E, 4.0)


def oracle_errors(rng):
    """Relative errors of every evaluator against the loop oracle on one random instance."""
    K, M, N = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(0, 7))
    ch, noise, S, v = instance(rng, K, M, N, 3)
    tau = rng.dirichlet(np.ones(3))
    rho = rng.uniform(0.0, 1.0, K)
    rho[rng.random(K) < 0.1] = 0.0
    pn = (noise.sigma_ant_sq, noise.sigma_proc_sq)
    sol = SchemeSolution("hybrid", S, v, tau, rho)
    errs = []

    def rel(a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))) if np.any(b) else float(np.max(np.abs(a)))

    g2, g3 = oracle.hybrid_sinrs(ch, S, v, rho, pn)
    errs.append(rel(metrics.sinr_hybrid_slot2(ch, S[:, 1], v[1], rho, noise), g2))
    errs.append(rel(metrics.sinr_hybrid_slot3(ch, S[:, 2], v[2], noise), g3))
    errs.append(rel(metrics.sum_rate("hybrid", ch, sol, noise), oracle.hybrid_rate(ch, S, v, tau, rho, pn)))
    errs.append(rel(metrics.harvested_energy("hybrid", ch, sol, noise),
                    oracle.hybrid_energy(ch, S, v, tau, rho, noise.zeta)))

    St = np.array([[random_psd(rng, M, noise.P[i]) for _ in range(K)] for i in range(K)])
    vt = random_phases(rng, ch.N, K)
    taut = rng.dirichlet(np.ones(K))
    sol_t = SchemeSolution("tdma", St, vt, taut)
    s2 = noise.sigma_sq
    errs.append(rel(metrics.sinr_tdma(ch, St, vt, noise), oracle.tdma_sinrs(ch, St, vt, s2)))
    errs.append(rel(metrics.sinr_tdma_d(ch, St, vt, noise), oracle.tdma_sinrs(ch, St, vt, s2, cancel=True)))
    errs.append(rel(metrics.sum_rate("tdma", ch, sol_t, noise), oracle.tdma_rate(ch, St, vt, taut, s2)))
    errs.append(rel(metrics.sum_rate("tdma_d", ch, sol_t, noise), oracle.tdma_rate(ch, St, vt, taut, s2, True)))
    errs.append(rel(metrics.harvested_energy("tdma", ch, sol_t, noise),
                    oracle.tdma_energy(ch, St, vt, taut, noise.zeta)))
    return max(errs)


def test_evaluators_match_oracle_small_batch():
    rng = np.random.default_rng(99)
    assert max(oracle_errors(rng) for _ in range(20)) <= 1e-9
