"""Feasibility checks under the EH and power constraints, and initial points.

Hybrid family: find the shortest energy-only slot that meets every EH
requirement, written as maximizing ``delta = 1 / tau_0`` by alternating an
SDP over the energy beams with a phase step that carries a nonnegative
residual ``delta'``.  TDMA family: minimize the total time the other slots
need to charge every Rx, alternating the lifted-covariance SDP with a phase
step.  Both loops are run until the objective stalls, and the verdict is
read off the converged value.
"""

from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .conic import ConicProgram
from .hybrid import HybridIterate
from .metrics import SchemeSolution
from .model import Scaled, mrt_covariance, phase_variable, project_phases, psd_project, random_phases
from .settings import AlgorithmSettings
from .surrogates import QuadBound

DEFAULTS = AlgorithmSettings()


@dataclass
class FeasibilityReport:
    feasible: bool
    delta_or_time: float
    witness: dict
    trace: list = field(default_factory=list)
    flags: list = field(default_factory=list)


def _eh_energy_slot(channels, noise, S, v):
    """Per-Rx energy when the whole interval is spent on beams ``S[i]`` with phases ``v``."""
    a = metrics.effective_channels(channels, v)[:, :, 0]
    g = np.real(np.einsum("ikm,imn,ikn->ik", a.conj(), S, a))
    return noise.zeta * g.sum(axis=0)


def _exact_delta(channels, noise, S, v):
    Q = _eh_energy_slot(channels, noise, S, v)
    on = noise.E > 0
    return float(np.min(Q[on] / noise.E[on]))


def _energy_sdp(sc, v, channels):
    K, M = channels.K, channels.M
    a = sc.a(v)[:, :, 0]
    prog = ConicProgram()
    S = [prog.hermitian(M, f"S_{i}") for i in range(K)]
    delta = prog.real(1, "delta", nonneg=True)
    for i in range(K):
        prog.add_nonneg(sc.P[i] - S[i].trace())
    for k in range(K):
        if sc.E[k] > 0:
            harvest = S[0].inner(np.outer(a[0, k], a[0, k].conj()))
            for i in range(1, K):
                harvest = harvest + S[i].inner(np.outer(a[i, k], a[i, k].conj()))
            prog.add_nonneg(sc.zeta * harvest - sc.E[k] * delta)
    prog.maximize(delta)
    return prog, S


def _energy_phase_step(sc, S, v_t, delta, channels):
    K, N = channels.K, channels.N
    prog = ConicProgram()
    v = phase_variable(prog, N)
    resid = prog.real(1, "resid", nonneg=True)
    for k in range(K):
        if sc.E[k] <= 0:
            continue
        harvest = prog.constant(0.0)
        for i in range(K):
            qb = QuadBound.at(sc.A(i, k, S[i]), v_t)
            harvest = harvest + (2.0 * v.real_inner(qb.c) - qb.q)
        prog.add_nonneg(sc.zeta * harvest - sc.E[k] * (delta + resid))
    prog.maximize(resid)
    return prog, v


def hybrid_feasibility(channels, noise, rng, settings=DEFAULTS):
    """Largest achievable ``delta = 1 / tau_0`` for an energy-only first slot.

    ``witness`` holds the energy beams ``S`` (K, M, M), the phases ``v`` and
    ``delta``.  Feasible iff ``1 / delta <= 1``.
    """
    K, M, N = channels.K, channels.M, channels.N
    v = random_phases(rng, N, 1)[0]
    if not np.any(noise.E > 0):
        a = metrics.effective_channels(channels, v)[:, :, 0]
        S = np.array([mrt_covariance(a[i, i], noise.P[i]) for i in range(K)])
        return FeasibilityReport(True, float("inf"), {"S": S, "v": v, "delta": float("inf")})
    sc = Scaled.build(channels, noise)
    trace, flags = [], []
    best = None
    for it in range(settings.feas_max_iters):
        prog, Svars = _energy_sdp(sc, v, channels)
        res = prog.solve(tol=settings.solver_tol)
        if not res.ok:
            flags.append(f"sdp_{res.status}")
            break
        S = psd_project(np.array([res.value(s) * sc.p_ref for s in Svars]), noise.P)
        delta = _exact_delta(channels, noise, S, v)
        stalled = best is not None and delta <= best["delta"] * (1 + settings.feas_epsilon)
        if best is None or delta > best["delta"]:
            best = {"S": S, "v": v.copy(), "delta": delta}
        trace.append(best["delta"])
        if stalled:
            break
        if N == 0:
            break
        prog, vvar = _energy_phase_step(sc, S, v, delta, channels)
        res = prog.solve(tol=settings.solver_tol)
        if not res.ok:
            flags.append(f"phase_{res.status}")
            break
        v_new = project_phases(res.value(vvar))
        if _exact_delta(channels, noise, S, v_new) < delta:
            break
        v = v_new
    else:
        flags.append("iter_cap")
    if best is None:
        return FeasibilityReport(False, 0.0, {}, trace, flags + ["solver_failure"])
    return FeasibilityReport(best["delta"] >= 1.0, best["delta"], best, trace, flags)


def hybrid_initial_point(report, channels, noise, rng):
    """Energy slot from the feasibility witness; the other two slots split the rest.

    Slots 1 and 2 get full-power matched beams toward each Tx's own Rx under
    random phases, with ``rho = 1`` so the split slot decodes only.
    """
    if not report.feasible:
        raise ValueError("no feasible witness to start from")
    K, N = channels.K, channels.N
    w = report.witness
    tau0 = 0.0 if not np.isfinite(w["delta"]) else 1.0 / w["delta"]
    tau = np.array([tau0, (1 - tau0) / 2, (1 - tau0) / 2])
    v = np.vstack([w["v"][None, :], random_phases(rng, N, 2)])
    a = metrics.effective_channels(channels, v)
    S = np.zeros((K, 3, channels.M, channels.M), dtype=complex)
    S[:, 0] = w["S"]
    for j in (1, 2):
        for i in range(K):
            S[i, j] = mrt_covariance(a[i, i, j], noise.P[i])
    W = S * tau[None, :, None, None]
    return HybridIterate(W=W, tau=tau, rho=np.ones(K), e=np.full(K, tau[1]), z=np.zeros(K), v=v)


def ps_initial_point(report, channels, noise):
    """Whole interval in the split slot with the energy beams and just enough harvesting."""
    if not report.feasible:
        raise ValueError("no feasible witness to start from")
    K, M = channels.K, channels.M
    w = report.witness
    S = np.zeros((K, 3, M, M), dtype=complex)
    S[:, 1] = w["S"]
    v = np.tile(w["v"], (3, 1))
    Q = _eh_energy_slot(channels, noise, w["S"], w["v"])
    rho = np.ones(K)
    on = noise.E > 0
    rho[on] = np.clip(1.0 - noise.E[on] / Q[on], 0.0, 1.0)
    return SchemeSolution("ps", S, v, np.array([0.0, 1.0, 0.0]), rho)


def ts_initial_point(report, channels, noise, rng):
    """Energy slot from the witness, remaining time on matched beams for decoding."""
    if not report.feasible:
        raise ValueError("no feasible witness to start from")
    K, M, N = channels.K, channels.M, channels.N
    w = report.witness
    tau0 = 0.0 if not np.isfinite(w["delta"]) else 1.0 / w["delta"]
    v = np.vstack([w["v"][None, :], w["v"][None, :], random_phases(rng, N, 1)])
    a = metrics.effective_channels(channels, v)
    S = np.zeros((K, 3, M, M), dtype=complex)
    S[:, 0] = w["S"]
    for i in range(K):
        S[i, 2] = mrt_covariance(a[i, i, 2], noise.P[i])
    return SchemeSolution("ts", S, v, np.array([tau0, 0.0, 1.0 - tau0]), np.ones(K))


def _time_sdp(sc, v, channels):
    K, M = channels.K, channels.M
    c = sc.a(v)  # c[i, k, j]
    prog = ConicProgram()
    tau = prog.real(K, "tau", nonneg=True)
    W = {}
    for i in range(K):
        for j in range(K):
            W[i, j] = prog.hermitian(M, f"W_{i}_{j}")
            prog.add_nonneg(tau[j] * sc.P[i] - W[i, j].trace())
    for k in range(K):
        if sc.E[k] <= 0:
            continue
        harvest = prog.constant(0.0)
        for j in range(K):
            if j == k:
                continue
            for i in range(K):
                harvest = harvest + W[i, j].inner(np.outer(c[i, k, j], c[i, k, j].conj()))
        prog.add_nonneg(sc.zeta * harvest - sc.E[k])
    prog.minimize(tau.sum())
    return prog, tau, W


def _time_phase_step(sc, S, tau, v_t, channels):
    K, N = channels.K, channels.N
    prog = ConicProgram()
    slots = [j for j in range(K) if tau[j] > 0]
    v = {j: phase_variable(prog, N) for j in slots}
    resid = prog.real(1, "resid", nonneg=True)
    for k in range(K):
        if sc.E[k] <= 0:
            continue
        harvest = prog.constant(0.0)
        for j in slots:
            if j == k:
                continue
            for i in range(K):
                qb = QuadBound.at(sc.A(i, k, S[i, j]), v_t[j])
                harvest = harvest + tau[j] * (2.0 * v[j].real_inner(qb.c) - qb.q)
        prog.add_nonneg(sc.zeta * harvest - sc.E[k] * (1.0 + resid))
    prog.maximize(resid)
    return prog, v


def _tdma_witness_energy(channels, noise, S, tau, v):
    return metrics.harvested_energy_tdma(channels, S, v, tau, noise.zeta)


def tdma_feasibility(channels, noise, rng, settings=DEFAULTS):
    """Minimal total time the non-own slots need to meet every EH requirement.

    ``witness`` is a TDMA ``SchemeSolution`` whose time fractions sum to the
    reported value.  Feasible iff that sum is at most 1.
    """
    K, M, N = channels.K, channels.M, channels.N
    v = random_phases(rng, N, K)
    if not np.any(noise.E > 0):
        a = metrics.effective_channels(channels, v)
        S = np.zeros((K, K, M, M), dtype=complex)
        for k in range(K):
            S[k, k] = mrt_covariance(a[k, k, k], noise.P[k])
        return FeasibilityReport(True, 0.0, {"solution": SchemeSolution("tdma", S, v, np.zeros(K))})
    if K == 1:
        return FeasibilityReport(False, float("inf"), {}, [], ["no_energy_slot"])
    sc = Scaled.build(channels, noise)
    trace, flags = [], []
    best = None
    for it in range(settings.feas_max_iters):
        prog, tauvar, W = _time_sdp(sc, v, channels)
        res = prog.solve(tol=settings.solver_tol)
        if not res.ok:
            flags.append(f"sdp_{res.status}")
            break
        tau = np.clip(res.value(tauvar), 0.0, None)
        S = np.zeros((K, K, M, M), dtype=complex)
        for (i, j), var in W.items():
            if tau[j] > settings.tau_zero_tol * 1e-3:
                S[i, j] = res.value(var) * sc.p_ref / tau[j]
        S = psd_project(S, noise.P)
        tau = np.where(S.any(axis=(0, 2, 3)), tau, 0.0)
        # exact rescaling so the witness meets every requirement with equality at worst
        Q = _tdma_witness_energy(channels, noise, S, tau, v)
        on = noise.E > 0
        scale = float(np.max(noise.E[on] / np.maximum(Q[on], 1e-300)))
        tau = tau * scale
        total = float(tau.sum())
        stalled = best is not None and total >= best[0] * (1 - settings.feas_epsilon)
        if best is None or total < best[0]:
            best = (total, SchemeSolution("tdma", S, v.copy(), tau))
        trace.append(best[0])
        if stalled:
            break
        if N == 0:
            break
        prog, vvars = _time_phase_step(sc, S, tau, v, channels)
        res = prog.solve(tol=settings.solver_tol)
        if not res.ok:
            flags.append(f"phase_{res.status}")
            break
        v_new = v.copy()
        for j, var in vvars.items():
            v_new[j] = res.value(var)
        v = project_phases(v_new)
    else:
        flags.append("iter_cap")
    if best is None:
        return FeasibilityReport(False, float("inf"), {}, trace, flags + ["solver_failure"])
    return FeasibilityReport(best[0] <= 1.0, best[0], {"solution": best[1]}, trace, flags)


def tdma_initial_point(report, channels, noise):
    """Witness with its time fractions stretched proportionally to fill the interval.

    With no EH requirement the witness is empty and every slot gets ``1/K``.
    """
    if not report.feasible:
        raise ValueError("no feasible witness to start from")
    sol = report.witness["solution"].copy()
    total = float(sol.tau.sum())
    K = channels.K
    if total <= 0:
        sol.tau = np.full(K, 1.0 / K)
    else:
        sol.tau = sol.tau / total
    return sol
